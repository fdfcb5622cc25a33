//! Closed-form Wasserstein-p bounds, the Stein-equation solver and
//! non-uniform tail bounds.
//!
//! None of the constants in these bounds is pinned down by the theory. The
//! default [`Constants::unit`] policy sets all of them to one, and reports
//! are then labelled as rate certificates with constants suppressed.

mod stein;
mod tail;

pub use stein::{normal_expectation, stein_residual, stein_solve, QuadSpec, WLaw};
pub use tail::{g_inverse, g_t, tail_bound, tail_condition, TailBound, TailBoundQuery};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rsums::{required_entries, RemainderTable};
use crate::{Error, Result};

/// Note attached to reports computed under the unit constant policy.
pub const UNIT_POLICY_NOTE: &str = "rate certificate, constants suppressed";

/// Multiplicative constants of the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// `C_p` of the local-dependence bounds.
    pub c_p: f64,
    /// `C_{k+ω}` of the moment bracket.
    pub c_bracket: f64,
    /// `C_{p,d}` of the m-dependent field bound.
    pub c_field: f64,
    /// Constant of the uniform Berry–Esseen bound.
    pub c_be: f64,
}

impl Constants {
    /// All constants equal to one.
    pub fn unit() -> Self {
        Constants { c_p: 1.0, c_bracket: 1.0, c_field: 1.0, c_be: 1.0 }
    }

    /// `true` when every constant is one.
    pub fn is_unit(&self) -> bool {
        *self == Self::unit()
    }

    /// Human-readable description of the policy.
    pub fn note(&self) -> String {
        if self.is_unit() {
            UNIT_POLICY_NOTE.to_string()
        } else {
            format!(
                "user constants: c_p={}, c_bracket={}, c_field={}, c_be={}",
                self.c_p, self.c_bracket, self.c_field, self.c_be
            )
        }
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::unit()
    }
}

/// The order `p` with its derived `k = ⌈p⌉` and `ω = p + 1 − ⌈p⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Wasserstein order `p ≥ 1`.
    pub p: f64,
    /// `⌈p⌉`.
    pub k: usize,
    /// `p + 1 − ⌈p⌉ ∈ (0, 1]`.
    pub omega: f64,
    /// Constant policy.
    pub constants: Constants,
}

impl BoundParams {
    /// Validates `p ≥ 1` and derives `k`, `ω`.
    pub fn new(p: f64, constants: Constants) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("p = {p} must be a finite number ≥ 1")));
        }
        let k = libm::ceil(p);
        Ok(BoundParams { p, k: k as usize, omega: p + 1.0 - k, constants })
    }
}

/// A named input echoed in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    /// Input name.
    pub name: String,
    /// Input value.
    pub value: f64,
}

/// Result of one bound evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Which bound was evaluated.
    pub bound: String,
    /// Inputs used.
    pub inputs: Vec<ReportInput>,
    /// Bound value (≥ 0).
    pub value: f64,
    /// Constant policy description.
    pub constants: String,
    /// Hypothesis warnings; empty when every check passed.
    pub warnings: Vec<String>,
}

fn input(name: &str, value: f64) -> ReportInput {
    ReportInput { name: name.to_string(), value }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("{name} = {v} must be positive and finite")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("{name} = {v} must be non-negative and finite")));
    }
    Ok(())
}

/// `C_p (Σ_{j<⌈p⌉} R_{j,1}^{1/j} + Σ_{j≤⌈p⌉} R_{j,ω}^{1/(j+ω−1)})` from a
/// remainder table. When `ω = 1` the two families coincide and each term
/// `R_{j,1}^{1/j}` is counted once, giving e.g. `C_2 (R_{1,1} + R_{2,1}^{1/2})`.
pub fn bound_local_wp(table: &RemainderTable, params: &BoundParams) -> Result<BoundReport> {
    let lookup = |j: usize, w: f64| -> Result<f64> {
        table
            .get(j, w)
            .map(|e| e.value)
            .ok_or_else(|| Error::InvalidArgument(format!("remainder table lacks R_{{{j},{w}}}")))
    };
    let mut value = 0.0;
    let mut inputs = Vec::new();
    for (j, w) in required_entries(params.p)? {
        let r = lookup(j, w)?;
        inputs.push(input(&format!("R[{j},{w}]"), r));
        value += libm::pow(r.max(0.0), 1.0 / (j as f64 + w - 1.0));
    }
    Ok(BoundReport {
        bound: "local_wp".into(),
        inputs,
        value: params.constants.c_p * value,
        constants: params.constants.note(),
        warnings: Vec::new(),
    })
}

/// Moment form of the local bound:
/// `C_p (M^{1+ω} σ^{−(ω+2)} Σ E|X|^{ω+2})^{1/ω} + C_p (M^{p+1} σ^{−(p+2)} Σ E|X|^{p+2})^{1/p}`.
///
/// `sum_omega2` and `sum_p2` are `Σ E|X_i|^{ω+2}` and `Σ E|X_i|^{p+2}` of the
/// raw variables. A warning is attached when either base is at least one
/// (the bound then carries no information).
pub fn bound_local_wp2(m: f64, sigma: f64, sum_omega2: f64, sum_p2: f64, params: &BoundParams) -> Result<BoundReport> {
    check_positive("M", m)?;
    check_positive("sigma", sigma)?;
    check_nonneg("moment sum of order ω+2", sum_omega2)?;
    check_nonneg("moment sum of order p+2", sum_p2)?;
    let (p, w) = (params.p, params.omega);
    let base1 = libm::pow(m, 1.0 + w) * libm::pow(sigma, -(w + 2.0)) * sum_omega2;
    let base2 = libm::pow(m, p + 1.0) * libm::pow(sigma, -(p + 2.0)) * sum_p2;
    let mut warnings = Vec::new();
    if base1 >= 1.0 {
        warnings.push(format!("M^(1+ω)σ^-(ω+2)ΣE|X|^(ω+2) = {base1} is not small"));
    }
    if base2 >= 1.0 {
        warnings.push(format!("M^(p+1)σ^-(p+2)ΣE|X|^(p+2) = {base2} is not small"));
    }
    let c = params.constants.c_p;
    Ok(BoundReport {
        bound: "local_wp_moments".into(),
        inputs: vec![
            input("M", m),
            input("sigma", sigma),
            input("moment_sum_omega_plus_2", sum_omega2),
            input("moment_sum_p_plus_2", sum_p2),
        ],
        value: c * libm::pow(base1, 1.0 / w) + c * libm::pow(base2, 1.0 / p),
        constants: params.constants.note(),
        warnings,
    })
}

/// Moment bracket on a remainder term:
/// `C_{k+ω} M^{k+ω} σ^{−(k+1+ω)} Σ E|X_i|^{k+1+ω}`.
pub fn bound_bracket(m: f64, sigma: f64, moment_sum: f64, k: usize, omega: f64, constants: &Constants) -> Result<f64> {
    check_positive("M", m)?;
    check_positive("sigma", sigma)?;
    check_nonneg("moment sum", moment_sum)?;
    if k == 0 || !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidArgument(format!("need k ≥ 1 and ω ∈ (0,1], got k={k}, ω={omega}")));
    }
    let kw = k as f64 + omega;
    Ok(constants.c_bracket * libm::pow(m, kw) * libm::pow(sigma, -(kw + 1.0)) * moment_sum)
}

/// m-dependent random field bound
/// `C_{p,d} m^{(1+ω)d/ω} M^{(p−ω)/(pω)} σ^{−(p+2)/p} (Σ E|X|^{p+2})^{1/p}`,
/// where `M` is the non-degeneracy constant. The window radius enters as
/// `max(m, 1)` so that the independent case `m = 0` keeps its i.i.d. shape.
pub fn bound_mdep_field(
    m: u64,
    d: usize,
    m_nondegen: f64,
    sigma: f64,
    sum_p2: f64,
    params: &BoundParams,
) -> Result<BoundReport> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension d must be ≥ 1".into()));
    }
    if !(m_nondegen >= 1.0) {
        return Err(Error::InvalidArgument(format!("non-degeneracy constant {m_nondegen} must be ≥ 1")));
    }
    check_positive("sigma", sigma)?;
    check_nonneg("moment sum of order p+2", sum_p2)?;
    let (p, w) = (params.p, params.omega);
    let mm = m.max(1) as f64;
    let value = params.constants.c_field
        * libm::pow(mm, (1.0 + w) * d as f64 / w)
        * libm::pow(m_nondegen, (p - w) / (p * w))
        * libm::pow(sigma, -(p + 2.0) / p)
        * libm::pow(sum_p2, 1.0 / p);
    Ok(BoundReport {
        bound: "mdep_field".into(),
        inputs: vec![
            input("m", m as f64),
            input("d", d as f64),
            input("M", m_nondegen),
            input("sigma", sigma),
            input("moment_sum_p_plus_2", sum_p2),
        ],
        value,
        constants: params.constants.note(),
        warnings: Vec::new(),
    })
}

/// Uniform Berry–Esseen bound recovered from the Wasserstein-p bound:
/// `C (Σ E|X_i|³ / σ³ + Σ_i (E|X_i|^{p+2})^{1/p} / σ^{1+2/p})`.
///
/// `sum_abs3` is `Σ E|X_i|³`; `abs_p2` holds `E|X_i|^{p+2}` per vertex
/// (the second term is not a function of the summed moment alone).
pub fn uniform_be_from_wp(sum_abs3: f64, abs_p2: &[f64], sigma: f64, p: f64, constants: &Constants) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_nonneg("moment sum of order 3", sum_abs3)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be ≥ 1")));
    }
    let mut second = 0.0;
    for &a in abs_p2 {
        check_nonneg("per-vertex moment", a)?;
        second += libm::pow(a, 1.0 / p);
    }
    Ok(constants.c_be * (sum_abs3 / libm::pow(sigma, 3.0) + second / libm::pow(sigma, 1.0 + 2.0 / p)))
}
