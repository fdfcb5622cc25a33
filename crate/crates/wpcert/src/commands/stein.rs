//! `stein`: solutions of the Stein equation for a built-in test function,
//! with pointwise and law-level residuals.

use serde_json::json;
use wpcert_core::bounds::{normal_expectation, stein_residual, stein_solve, QuadSpec, WLaw};
use wpcert_core::quadrature::Atom;

use super::{grid, to_value, CommandOutput, Context};
use crate::formats::Table;
use crate::{CliError, RunConfig};

/// Keys of the `[stein]` section.
pub const KEYS: &[&str] = &[
    "stein.h",
    "stein.law",
    "stein.atoms",
    "stein.w",
    "stein.w_min",
    "stein.w_max",
    "stein.w_count",
    "stein.nodes",
    "stein.panel_width",
    "stein.tail_cutoff",
    "stein.diff_step",
    "stein.growth",
];

/// Names of the built-in test functions.
pub const BUILTIN_H: &[&str] = &["identity", "square", "cube", "quartic", "abs", "cos", "sin", "tanh", "relu", "bump", "step"];

/// The built-in test function `h` called `name`, with its polynomial growth
/// order (used to widen the quadrature range).
pub fn builtin_h(name: &str) -> Option<(fn(f64) -> f64, f64)> {
    let h: (fn(f64) -> f64, f64) = match name {
        "identity" => (|t| t, 1.0),
        "square" => (|t| t * t, 2.0),
        "cube" => (|t| t * t * t, 3.0),
        "quartic" => (|t| t * t * t * t, 4.0),
        "abs" => (f64::abs, 1.0),
        "cos" => (f64::cos, 0.0),
        "sin" => (f64::sin, 0.0),
        "tanh" => (f64::tanh, 0.0),
        "relu" => (|t| t.max(0.0), 1.0),
        "bump" => (|t| (-t * t).exp(), 0.0),
        "step" => (|t| if t <= 0.0 { 1.0 } else { 0.0 }, 0.0),
        _ => return None,
    };
    Some(h)
}

/// Parses `x:w, x:w, …` into atoms.
fn parse_atoms(cfg: &RunConfig) -> Result<Vec<Atom>, CliError> {
    let text = cfg.str("stein.atoms")?;
    let mut atoms = Vec::new();
    for item in text.split(',') {
        let parsed = item.trim().split_once(':').and_then(|(x, w)| {
            let location = x.trim().parse::<f64>().ok().filter(|v| v.is_finite())?;
            let weight = w.trim().parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite())?;
            Some(Atom { location, weight })
        });
        atoms.push(parsed.ok_or_else(|| cfg.invalid("stein.atoms", format!("expected 'location:weight', found '{}'", item.trim())))?);
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(cfg.invalid("stein.atoms", format!("weights sum to {total}, not 1")).into());
    }
    Ok(atoms)
}

/// Runs the command.
pub fn run(cfg: &RunConfig, _ctx: &Context) -> Result<CommandOutput, CliError> {
    let h_name = cfg.str("stein.h")?;
    let (h, growth) = builtin_h(h_name)
        .ok_or_else(|| cfg.invalid("stein.h", format!("unknown test function '{h_name}'; built-ins: {}", BUILTIN_H.join(", "))))?;
    let d = QuadSpec::default();
    let quad = QuadSpec {
        nodes: cfg.u64_or("stein.nodes", d.nodes as u64)? as usize,
        panel_width: cfg.f64_or("stein.panel_width", d.panel_width)?,
        tail_cutoff: cfg.f64_or("stein.tail_cutoff", d.tail_cutoff)?,
        diff_step: cfg.f64_or("stein.diff_step", d.diff_step)?,
        growth: cfg.f64_or("stein.growth", growth.max(d.growth))?,
    };
    let law = match cfg.opt_str("stein.law").unwrap_or("normal") {
        "normal" => WLaw::StandardNormal,
        "atoms" => WLaw::Atoms(parse_atoms(cfg)?),
        other => return Err(cfg.invalid("stein.law", format!("expected normal or atoms, found '{other}'")).into()),
    };
    let ws = grid(cfg, "stein.w")?;

    let nh = normal_expectation(h, &quad)?;
    let law_residual = stein_residual(&law, &h, Some(nh), &quad)?;
    let mut table = Table::new(&["w", "h", "f", "residual"]);
    let mut rows = Vec::new();
    for &w in &ws {
        let f = stein_solve(&h, nh, w, &quad)?;
        let residual = stein_residual(&WLaw::Atoms(vec![Atom { location: w, weight: 1.0 }]), &h, Some(nh), &quad)?;
        table.push(vec![w.into(), h(w).into(), f.into(), residual.into()]);
        rows.push(json!({ "w": w, "h": h(w), "f": f, "residual": residual }));
    }
    let json = json!({
        "command": "stein",
        "h": h_name,
        "nh": nh,
        "law": to_value(&law),
        "law_residual": law_residual,
        "quadrature": to_value(&quad),
        "points": rows,
    });
    Ok(CommandOutput { name: "stein".into(), json, table, extra: Vec::new() })
}
