//! `simulate`: empirical Wasserstein-p distances over a size ladder and
//! log–log rate fits.

use serde_json::json;
use wpcert_core::sim::{check_sizes, fit_rate, RatePoint};

use super::{to_value, CommandOutput, Context};
use crate::formats::{self, Table};
use crate::models;
use crate::parallel;
use crate::{CliError, RunConfig};

/// Keys of the `[simulate]` section.
pub const KEYS: &[&str] = &["simulate.sizes", "simulate.p", "simulate.reps"];

/// Default number of replicates per size.
pub const DEFAULT_REPS: u64 = 200 * 4096;

/// Runs the command.
pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<CommandOutput, CliError> {
    let spec = models::generator(cfg, false)?.ok_or_else(|| {
        CliError::Config(crate::ConfigError {
            line: None,
            key: Some("model.generator".into()),
            message: "simulate needs a generator".into(),
        })
    })?;
    let sizes = cfg.usize_list("simulate.sizes")?;
    check_sizes(&sizes).map_err(|e| cfg.invalid("simulate.sizes", e.to_string()))?;
    for &s in &sizes {
        spec.with_size(s).validate().map_err(|e| cfg.invalid("simulate.sizes", format!("size {s}: {e}")))?;
    }
    let ps = cfg.f64_list("simulate.p")?;
    if ps.is_empty() || ps.iter().any(|p| !(*p >= 1.0)) {
        return Err(cfg.invalid("simulate.p", "need one or more orders p ≥ 1").into());
    }
    let reps = cfg.u64_or("simulate.reps", DEFAULT_REPS)?;
    if reps < 2 {
        return Err(cfg.invalid("simulate.reps", "need at least 2 replicates").into());
    }

    let points = parallel::rate_points(&spec, &sizes, &ps, reps, ctx.seed, &ctx.workers)?;
    let mut fits = Vec::new();
    let mut extra = Vec::new();
    for &p in &ps {
        let at_p: Vec<RatePoint> = points.iter().filter(|r| r.p == p).copied().collect();
        let fit = fit_rate(&at_p)?;
        let xy: Vec<(f64, f64)> = at_p.iter().map(|r| (r.scale as f64, r.distance)).collect();
        extra.push((
            format!("simulate_p{p}.dat"),
            formats::to_dat(
                &format!("scale W_p distance (p = {p}); fitted log-log slope {}", formats::fmt_f64(fit.slope)),
                &xy,
            ),
        ));
        let mut v = to_value(&fit);
        v["p"] = json!(p);
        fits.push(v);
    }

    let mut t = Table::new(&["size", "scale", "p", "distance", "std_error", "reps", "seed"]);
    for r in &points {
        t.push(vec![r.size.into(), r.scale.into(), r.p.into(), r.distance.into(), r.std_error.into(), r.reps.into(), r.seed.into()]);
    }
    let json = json!({
        "command": "simulate",
        "generator": to_value(&spec),
        "sizes": sizes,
        "p": ps,
        "reps": reps,
        "seed": ctx.seed,
        "points": to_value(&points),
        "fits": fits,
    });
    Ok(CommandOutput { name: "simulate".into(), json, table: t, extra })
}
