//! `selftest`: recomputes a set of named exact-oracle checks and compares
//! them with golden values.
//!
//! The golden file is JSON, `{"checks": [{"name", "expected", "tol"}, …]}`;
//! a copy is embedded in the binary and `selftest.golden` substitutes
//! another. A check passes when `|actual − expected| ≤ tol`.

use serde::Deserialize;
use serde_json::json;
use wpcert_core::bounds::{self, stein_solve, BoundParams, Constants, QuadSpec, TailBoundQuery};
use wpcert_core::cumulants::{self, CumulantSeq, Rational, Scalar};
use wpcert_core::depgraph::{DependencyGraph, VertexId};
use wpcert_core::matching::{choose_q, MatchTarget, QChoice};
use wpcert_core::normal;
use wpcert_core::rng;
use wpcert_core::rsums::{self, JointModel};

use super::{CommandOutput, Context};
use crate::formats::Table;
use crate::models::resolve;
use crate::{CliError, RunConfig};

/// Keys of the `[selftest]` section.
pub const KEYS: &[&str] = &["selftest.golden", "selftest.battery"];

/// The embedded golden file.
pub const GOLDEN: &str = include_str!("../../golden/selftest.json");

/// Models in each random battery.
pub const DEFAULT_BATTERY: u64 = 20;

const BUDGET: u64 = 1 << 26;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Golden {
    checks: Vec<GoldenCheck>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoldenCheck {
    name: String,
    expected: f64,
    tol: f64,
}

fn isolated_coins(n: usize) -> Result<JointModel, CliError> {
    let ids: Vec<VertexId> = (0..n as i64).map(VertexId::int).collect();
    let graph = DependencyGraph::from_edge_list(&[], Some(&ids))?;
    let mut outcomes = Vec::new();
    for code in 0..1usize << n {
        let values = (0..n).map(|i| if code >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        outcomes.push((1.0 / (1usize << n) as f64, values));
    }
    Ok(JointModel::exact(graph, &outcomes)?)
}

fn round_trip_cumulants(seed: u64) -> (usize, f64) {
    use rand::Rng;
    let mut s = rng::stream(seed, &[rng::TAG_BATTERY, 0x5254]);
    let mut mismatches = 0;
    let mut max_rel: f64 = 0.0;
    for _ in 0..5 {
        let ints: Vec<i64> = (0..12).map(|_| s.random_range(-5..=5)).collect();
        let k = CumulantSeq(ints.iter().map(|&v| Rational::from_i64(v)).collect::<Vec<_>>());
        let back = cumulants::cumulants_from_moments(&cumulants::moments_from_cumulants(&k));
        if back.as_ref() != Ok(&k) {
            mismatches += 1;
        }
        // Standardised cumulants (mean 0, variance 1), as produced by
        // normalised sums; the error is relative with an absolute floor of 1.
        let floats: Vec<f64> = (0..12)
            .map(|j| match j {
                0 => 0.0,
                1 => 1.0,
                _ => s.random_range(-0.3..=0.3),
            })
            .collect();
        let k = CumulantSeq(floats.clone());
        match cumulants::cumulants_from_moments(&cumulants::moments_from_cumulants(&k)) {
            Ok(back) => {
                for (a, b) in floats.iter().zip(&back.0) {
                    max_rel = max_rel.max((a - b).abs() / a.abs().max(1.0));
                }
            }
            Err(_) => max_rel = f64::INFINITY,
        }
    }
    (mismatches, max_rel)
}

/// Computes the check called `name`; `None` for unknown names.
fn compute(name: &str, seed: u64, battery: u64) -> Option<Result<f64, CliError>> {
    let run = || -> Result<f64, CliError> {
        Ok(match name {
            "gaussian_moment_2" | "gaussian_moment_4" | "gaussian_moment_6" | "gaussian_moment_8"
            | "gaussian_moment_10" => {
                let j: usize = name.trim_start_matches("gaussian_moment_").parse().expect("numeric suffix");
                cumulants::gaussian_moments::<Rational>(j).get(j).to_f64()
            }
            "gaussian_hankel_2" => cumulants::hankel_det(&cumulants::gaussian_moments::<Rational>(4), 2)?.to_f64(),
            "cumulant_round_trip_rational_mismatches" => round_trip_cumulants(seed).0 as f64,
            "cumulant_round_trip_f64_max_rel_error" => round_trip_cumulants(seed).1,
            "r11_single_coin" => rsums::remainder(&isolated_coins(1)?, 1, 1.0, BUDGET)?.value,
            "r11_two_independent_coins" => rsums::remainder(&isolated_coins(2)?, 1, 1.0, BUDGET)?.value,
            "r21_two_independent_coins" => rsums::remainder(&isolated_coins(2)?, 2, 1.0, BUDGET)?.value,
            "local_wp_p2_two_independent_coins" => {
                let table = rsums::remainder_table(&isolated_coins(2)?, 2.0, BUDGET)?;
                bounds::bound_local_wp(&table, &BoundParams::new(2.0, Constants::unit())?)?.value
            }
            "choose_q_u_0.01" => match choose_q(&MatchTarget::new(2.0, vec![0.01], 0.5)?)? {
                QChoice::Q(q) => q as f64,
                QChoice::Gaussian { .. } => f64::NAN,
            },
            "stein_identity_solution_at_0.7" => stein_solve(&|t: f64| t, 0.0, 0.7, &QuadSpec::default())?,
            "stein_square_solution_at_1.3" => stein_solve(&|t: f64| t * t, 1.0, 1.3, &QuadSpec::default())?,
            "g_inverse_round_trip_max_error" => {
                let mut worst: f64 = 0.0;
                for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
                    for i in 1..20 {
                        let y = i as f64 / 20.0;
                        let x = bounds::g_inverse(t, 1.5, y, 1e-14)?;
                        worst = worst.max((bounds::g_t(t, 1.5, x) - y).abs());
                    }
                }
                worst
            }
            "tail_bound_wp0_upper" => bounds::tail_bound(&TailBoundQuery { t: 2.0, beta: 1.0, p: 2.0, wp: 0.0 })?.upper,
            "normal_quantile_0.975" => normal::quantile(0.975),
            "wf_expansion_battery_max_residual" => {
                let mut worst: f64 = 0.0;
                for i in 0..battery {
                    let m = rsums::battery_model(seed, i)?;
                    for degree in 1..=6 {
                        worst = worst.max(rsums::verify_wf_expansion(&m, degree)?.abs());
                    }
                }
                worst
            }
            "cumulant_bound_battery_violations" => {
                let mut violations = 0;
                for i in 0..battery {
                    let m = rsums::battery_model(seed, i)?;
                    for k in 1..=3 {
                        let c = rsums::cumulant_bound_check(&m, k, BUDGET)?;
                        if !(c.lhs < c.rhs) {
                            violations += 1;
                        }
                    }
                }
                violations as f64
            }
            _ => unreachable!("filtered by KNOWN_CHECKS"),
        })
    };
    KNOWN_CHECKS.contains(&name).then(run)
}

/// Names of every check the self-test can compute.
pub const KNOWN_CHECKS: &[&str] = &[
    "gaussian_moment_2",
    "gaussian_moment_4",
    "gaussian_moment_6",
    "gaussian_moment_8",
    "gaussian_moment_10",
    "gaussian_hankel_2",
    "cumulant_round_trip_rational_mismatches",
    "cumulant_round_trip_f64_max_rel_error",
    "r11_single_coin",
    "r11_two_independent_coins",
    "r21_two_independent_coins",
    "local_wp_p2_two_independent_coins",
    "choose_q_u_0.01",
    "stein_identity_solution_at_0.7",
    "stein_square_solution_at_1.3",
    "g_inverse_round_trip_max_error",
    "tail_bound_wp0_upper",
    "normal_quantile_0.975",
    "wf_expansion_battery_max_residual",
    "cumulant_bound_battery_violations",
];

/// Runs the command. A failing check yields both the report (for writing)
/// and [`CliError::SelftestFailed`] naming the failures, via the returned
/// pair.
pub fn run(cfg: &RunConfig, ctx: &Context) -> Result<(CommandOutput, Vec<String>), CliError> {
    let text = match cfg.opt_str("selftest.golden") {
        Some(path) => {
            let path = resolve(ctx.base(), path);
            std::fs::read_to_string(&path)
                .map_err(|e| cfg.invalid("selftest.golden", format!("cannot read {}: {e}", path.display())))?
        }
        None => GOLDEN.to_string(),
    };
    let golden: Golden = serde_json::from_str(&text).map_err(|e| {
        let err = CliError::Input(format!("golden file: {e}"));
        if cfg.contains("selftest.golden") { cfg.invalid("selftest.golden", err.to_string()).into() } else { err }
    })?;
    let battery = cfg.u64_or("selftest.battery", DEFAULT_BATTERY)?;
    let mut table = Table::new(&["check", "expected", "actual", "tol", "pass"]);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for c in &golden.checks {
        let actual = match compute(&c.name, ctx.seed, battery) {
            None => return Err(CliError::Input(format!("golden file names unknown check '{}'", c.name))),
            Some(Ok(v)) => v,
            Some(Err(_)) => f64::NAN,
        };
        let pass = (actual - c.expected).abs() <= c.tol;
        if !pass {
            failures.push(c.name.clone());
        }
        table.push(vec![c.name.clone().into(), c.expected.into(), actual.into(), c.tol.into(), pass.into()]);
        rows.push(json!({ "name": c.name, "expected": c.expected, "actual": actual, "tol": c.tol, "pass": pass }));
    }
    let json = json!({
        "command": "selftest",
        "seed": ctx.seed,
        "passed": golden.checks.len() - failures.len(),
        "failed": failures.len(),
        "checks": rows,
    });
    Ok((CommandOutput { name: "selftest".into(), json, table, extra: Vec::new() }, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_names_are_known() {
        let g: Golden = serde_json::from_str(GOLDEN).unwrap();
        let names: Vec<&str> = g.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, KNOWN_CHECKS);
    }
}
