//! `bound`: remainder table and every applicable Wasserstein-p bound.

use serde_json::{json, Value};
use wpcert_core::bounds::{self, BoundParams, BoundReport, Constants, ReportInput};
use wpcert_core::depgraph::SizeMethod;
use wpcert_core::rsums::BackendKind;
use wpcert_core::sim::GeneratorSpec;

use super::{order_p, to_value, CommandOutput, Context};
use crate::formats::{Cell, Table};
use crate::models;
use crate::parallel;
use crate::{CliError, RunConfig};

/// Keys of the `[bound]` section.
pub const KEYS: &[&str] = &[
    "bound.p",
    "bound.budget",
    "bound.neighborhood",
    "bound.nondegen",
    "bound.c_p",
    "bound.c_bracket",
    "bound.c_field",
    "bound.c_be",
];

/// Default chain-enumeration budget (node visits per remainder term).
pub const DEFAULT_BUDGET: u64 = 100_000_000;

fn constants(cfg: &RunConfig) -> Result<Constants, CliError> {
    let mut c = Constants::unit();
    for (key, slot) in [
        ("bound.c_p", &mut c.c_p),
        ("bound.c_bracket", &mut c.c_bracket),
        ("bound.c_field", &mut c.c_field),
        ("bound.c_be", &mut c.c_be),
    ] {
        *slot = cfg.f64_or(key, 1.0)?;
        if !(*slot > 0.0) {
            return Err(cfg.invalid(key, "constants must be positive").into());
        }
    }
    Ok(c)
}

/// Runs the command.
pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<CommandOutput, CliError> {
    let p = order_p(cfg, "bound.p")?;
    let budget = cfg.u64_or("bound.budget", DEFAULT_BUDGET)?;
    let method = match cfg.opt_str("bound.neighborhood").unwrap_or("exact") {
        "exact" => SizeMethod::Exact { budget },
        "shortcut" => SizeMethod::Shortcut,
        other => {
            return Err(cfg
                .invalid("bound.neighborhood", format!("expected exact or shortcut, found '{other}'"))
                .into())
        }
    };
    let nondegen = cfg.f64_or("bound.nondegen", 1.0)?;
    let constants = constants(cfg)?;
    let params = BoundParams::new(p, constants)?;

    let loaded = models::load(cfg, ctx.base(), ctx.seed, &ctx.workers)?;
    let model = &loaded.model;
    let graph = model.graph();
    let table = parallel::remainder_table(model, p, budget, &ctx.workers)?;
    let q = params.k;
    let m_size = graph.max_neighborhood_size(q, method)?;
    let m = m_size.value as f64;
    let sigma = model.sigma();
    let omega = params.omega;

    let mut reports: Vec<BoundReport> = vec![
        bounds::bound_local_wp(&table, &params)?,
        bounds::bound_local_wp2(
            m,
            sigma,
            model.abs_moment_sum(omega + 2.0)?,
            model.abs_moment_sum(p + 2.0)?,
            &params,
        )?,
    ];
    if let Some(GeneratorSpec::MdepMa { d, m: radius, .. }) = loaded.generator {
        reports.push(bounds::bound_mdep_field(
            radius as u64,
            d,
            nondegen,
            sigma,
            model.abs_moment_sum(p + 2.0)?,
            &params,
        )?);
    }
    let sum_abs3 = model.abs_moment_sum(3.0)?;
    let per_vertex = model.per_vertex_abs_moments(p + 2.0)?;
    reports.push(BoundReport {
        bound: "uniform_be".into(),
        inputs: vec![
            ReportInput { name: "sigma".into(), value: sigma },
            ReportInput { name: "moment_sum_3".into(), value: sum_abs3 },
            ReportInput { name: "moment_sum_p_plus_2".into(), value: per_vertex.iter().sum() },
        ],
        value: bounds::uniform_be_from_wp(sum_abs3, &per_vertex, sigma, p, &constants)?,
        constants: constants.note(),
        warnings: Vec::new(),
    });
    if model.sigma_estimated() {
        for r in reports.iter_mut() {
            r.warnings.push("sigma estimated from replicates; the value is a Monte Carlo estimate".into());
        }
    }

    let mut brackets = Vec::new();
    for e in &table.entries {
        let order = e.j as f64 + 1.0 + e.omega;
        let value = bounds::bound_bracket(m, sigma, model.abs_moment_sum(order)?, e.j, e.omega, &constants)?;
        brackets.push(json!({ "j": e.j, "omega": e.omega, "value": value }));
    }

    let backend = match model.kind() {
        BackendKind::Exact => "exact",
        BackendKind::Sampled => "sampled",
        BackendKind::Oracle => "oracle",
    };
    let json = json!({
        "command": "bound",
        "p": p,
        "seed": ctx.seed,
        "constants": constants.note(),
        "model": {
            "backend": backend,
            "vertices": graph.len(),
            "edges": graph.edge_count(),
            "outcomes": model.outcomes(),
            "sigma": sigma,
            "sigma_estimated": model.sigma_estimated(),
            "generator": loaded.generator.as_ref().map(to_value).unwrap_or(Value::Null),
            "reps": loaded.reps,
        },
        "neighborhood": { "q": q, "value": m_size.value, "upper_bound": m_size.upper_bound },
        "remainder_table": to_value(&table),
        "reports": to_value(&reports),
        "brackets": brackets,
    });

    let mut t = Table::new(&["quantity", "value", "std_error", "note"]);
    t.push(vec!["sigma".into(), sigma.into(), Cell::Empty, if model.sigma_estimated() { "estimated" } else { "exact" }.into()]);
    t.push(vec![
        "M".into(),
        m_size.value.into(),
        Cell::Empty,
        if m_size.upper_bound { "upper bound" } else { "exact" }.into(),
    ]);
    for e in &table.entries {
        t.push(vec![format!("R[{},{}]", e.j, e.omega).into(), e.value.into(), e.std_error.into(), "remainder".into()]);
    }
    for r in &reports {
        t.push(vec![r.bound.clone().into(), r.value.into(), Cell::Empty, r.constants.clone().into()]);
    }
    for (e, b) in table.entries.iter().zip(&brackets) {
        t.push(vec![
            format!("bracket[{},{}]", e.j, e.omega).into(),
            b["value"].as_f64().into(),
            Cell::Empty,
            constants.note().into(),
        ]);
    }
    Ok(CommandOutput { name: "bound".into(), json, table: t, extra: Vec::new() })
}
