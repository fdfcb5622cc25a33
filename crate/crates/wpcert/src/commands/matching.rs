//! `match`: cumulant matching for given targets.

use serde_json::json;
use wpcert_core::matching::{self, MatchTarget, DEFAULT_C_P, DEFAULT_RETRIES};

use super::{order_p, sequence_json, to_value, CommandOutput, Context};
use crate::formats::{Cell, Table};
use crate::{CliError, RunConfig};

/// Keys of the `[match]` section.
pub const KEYS: &[&str] = &[
    "match.p",
    "match.u",
    "match.c_p",
    "match.realize_order",
    "match.index_size",
    "match.retries",
];

/// Runs the command.
pub fn run(cfg: &RunConfig, _ctx: &Context) -> Result<CommandOutput, CliError> {
    let p = order_p(cfg, "match.p")?;
    let u = if cfg.contains("match.u") { cfg.f64_list("match.u")? } else { Vec::new() };
    let c_p = cfg.f64_or("match.c_p", DEFAULT_C_P)?;
    let mut target = MatchTarget::new(p, u.clone(), c_p).map_err(|e| {
        let key = if e.to_string().contains("C_p") { "match.c_p" } else { "match.u" };
        cfg.invalid(key, e.to_string())
    })?;
    if cfg.contains("match.index_size") {
        target.index_size = Some(cfg.u64("match.index_size")?);
    }
    let realize_order = match cfg.opt_str("match.realize_order") {
        Some(_) => cfg.u64("match.realize_order")? as usize,
        None => matching::default_realize_order(p),
    };
    let retries = cfg.u64_or("match.retries", DEFAULT_RETRIES as u64)?;
    let retries = u32::try_from(retries).map_err(|_| cfg.invalid("match.retries", "too large"))?;
    let r = matching::build_match_with(&target, realize_order, retries)?;

    let json = json!({
        "command": "match",
        "p": p,
        "u": u,
        "c_p": c_p,
        "realize_order": realize_order,
        "q": r.q,
        "gaussian_branch": r.gaussian_branch,
        "c_p_used": r.c_p_used,
        "retries": r.retries,
        "cumulants": sequence_json(r.xi_cumulants.order(), &r.xi_cumulants.0),
        "moments": sequence_json(r.xi_moments.order(), &r.xi_moments.0),
        "hankel_dets": r.hankel_dets,
        "atoms": to_value(&r.atoms),
        "abs_moment": r.abs_moment,
        "abs_moment_bound": r.abs_moment_bound,
        "kappa_lower_bound": r.kappa_lower_bound,
    });

    let mut t = Table::new(&["quantity", "index", "value", "weight"]);
    let scalar = |t: &mut Table, name: &str, v: Cell| t.push(vec![name.into(), Cell::Empty, v, Cell::Empty]);
    scalar(&mut t, "q", r.q.map_or(Cell::Empty, Cell::from));
    scalar(&mut t, "gaussian_branch", r.gaussian_branch.into());
    scalar(&mut t, "c_p_used", r.c_p_used.into());
    scalar(&mut t, "retries", (r.retries as usize).into());
    for (j, k) in r.xi_cumulants.0.iter().enumerate() {
        t.push(vec!["cumulant".into(), (j + 1).into(), (*k).into(), Cell::Empty]);
    }
    for (j, m) in r.xi_moments.0.iter().enumerate() {
        t.push(vec!["moment".into(), j.into(), (*m).into(), Cell::Empty]);
    }
    for (j, h) in r.hankel_dets.iter().enumerate() {
        t.push(vec!["hankel_det".into(), j.into(), (*h).into(), Cell::Empty]);
    }
    for (j, a) in r.atoms.iter().enumerate() {
        t.push(vec!["atom".into(), j.into(), a.location.into(), a.weight.into()]);
    }
    scalar(&mut t, "abs_moment", r.abs_moment.into());
    scalar(&mut t, "abs_moment_bound", r.abs_moment_bound.into());
    scalar(&mut t, "kappa_lower_bound", r.kappa_lower_bound.into());
    Ok(CommandOutput { name: "match".into(), json, table: t, extra: Vec::new() })
}
