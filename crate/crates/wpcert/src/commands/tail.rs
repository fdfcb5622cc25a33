//! `tail`: non-uniform tail bounds over a threshold grid, optionally
//! compared with a Monte Carlo estimate of `|P(W ≥ t) − Φᶜ(t)|`.

use serde_json::json;
use wpcert_core::bounds::{tail_bound, TailBoundQuery};
use wpcert_core::normal;
use wpcert_core::rng;
use wpcert_core::sim::{self as stats, tail_points, EmpiricalDist};

use super::{grid, order_p, to_value, CommandOutput, Context};
use crate::formats::{Cell, Table};
use crate::models;
use crate::parallel;
use crate::{CliError, RunConfig};

/// Keys of the `[tail]` section.
pub const KEYS: &[&str] = &[
    "tail.t",
    "tail.t_min",
    "tail.t_max",
    "tail.t_count",
    "tail.beta",
    "tail.p",
    "tail.wp",
    "tail.reps",
];

/// Runs the command.
///
/// `wp` is either a number or `estimate`, in which case `W_p` is measured
/// on the Monte Carlo sample (which then requires `reps` and a generator).
pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<CommandOutput, CliError> {
    let ts = grid(cfg, "tail.t")?;
    if ts.iter().any(|t| !(*t > 0.0)) {
        return Err(cfg.invalid(if cfg.contains("tail.t") { "tail.t" } else { "tail.t_min" }, "thresholds must be positive").into());
    }
    let beta = cfg.f64("tail.beta")?;
    if !(beta > 0.0) {
        return Err(cfg.invalid("tail.beta", "β must be positive").into());
    }
    let p = order_p(cfg, "tail.p")?;
    let estimate_wp = cfg.str("tail.wp")? == "estimate";

    let sample = if cfg.contains("tail.reps") {
        let reps = cfg.u64("tail.reps")?;
        if reps < 2 {
            return Err(cfg.invalid("tail.reps", "need at least 2 replicates").into());
        }
        let spec = models::generator(cfg, true)?.ok_or_else(|| cfg.invalid("tail.reps", "Monte Carlo comparison needs model.generator"))?;
        let w = parallel::sample_w(&spec, reps, rng::derive(ctx.seed, &[rng::TAG_TAIL]), &ctx.workers)?;
        Some((spec, reps, EmpiricalDist::new(w)))
    } else {
        None
    };
    let wp = if estimate_wp {
        let (_, _, d) = sample.as_ref().ok_or_else(|| cfg.invalid("tail.wp", "wp = estimate needs tail.reps"))?;
        stats::wasserstein_to_normal(d, p)?
    } else {
        let wp = cfg.f64("tail.wp")?;
        if !(wp >= 0.0) {
            return Err(cfg.invalid("tail.wp", "W_p must be non-negative").into());
        }
        wp
    };

    let rows = ts
        .iter()
        .map(|&t| tail_bound(&TailBoundQuery { t, beta, p, wp }))
        .collect::<Result<Vec<_>, _>>()?;
    let mc = sample.as_ref().map(|(_, _, d)| tail_points(d, &ts));

    let mut header = vec!["t", "beta", "p", "wp", "upper", "lower", "condition_ok"];
    if mc.is_some() {
        header.extend(["mc_prob", "mc_std_error", "deviation", "low_count", "dominated"]);
    }
    let mut table = Table::new(&header);
    let mut points = Vec::new();
    for (i, b) in rows.iter().enumerate() {
        let mut row: Vec<Cell> = vec![
            b.query.t.into(),
            beta.into(),
            p.into(),
            wp.into(),
            b.upper.into(),
            b.lower.into(),
            b.condition_ok.into(),
        ];
        let mut v = to_value(b);
        if let Some(mc) = &mc {
            let tp = mc[i];
            let deviation = (tp.prob - normal::sf(tp.t)).abs();
            let dominated = deviation <= b.upper + 3.0 * tp.std_error;
            row.extend([tp.prob.into(), tp.std_error.into(), deviation.into(), tp.low_count.into(), dominated.into()]);
            v["monte_carlo"] = json!({
                "prob": tp.prob,
                "std_error": tp.std_error,
                "deviation": deviation,
                "low_count": tp.low_count,
                "dominated": dominated,
            });
        }
        table.push(row);
        points.push(v);
    }
    let json = json!({
        "command": "tail",
        "beta": beta,
        "p": p,
        "wp": wp,
        "wp_estimated": estimate_wp,
        "seed": ctx.seed,
        "generator": sample.as_ref().map(|(s, _, _)| to_value(s)),
        "reps": sample.as_ref().map(|(_, r, _)| *r),
        "points": points,
    });
    Ok(CommandOutput { name: "tail".into(), json, table, extra: Vec::new() })
}
