//! Non-uniform tail bounds for `|P(W ≥ t) − Φᶜ(t)|` in terms of the
//! Wasserstein-p distance `ω_p`.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::normal;
use crate::{Error, Result};

/// One tail-bound evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBoundQuery {
    /// Threshold `t > 0`.
    pub t: f64,
    /// Decay parameter `β > 0`.
    pub beta: f64,
    /// Wasserstein order `p ≥ 1`.
    pub p: f64,
    /// `ω_p = W_p(L(W), N(0,1)) ≥ 0`.
    pub wp: f64,
}

/// Upper and lower deviation bounds at one threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// The query.
    pub query: TailBoundQuery,
    /// Upper deviation `C ω_p^{p/(p+1)} / t^{1+βp/(p+1)}`.
    pub upper: f64,
    /// Lower deviation `(C/t) φ(tp/(p+1)) ω_p^{p/(p+1)}`.
    pub lower: f64,
    /// Whether the hypothesis on `(t, β, ω_p)` holds; the values are only
    /// certified when it does.
    pub condition_ok: bool,
}

/// `g_t(x) = (1−x)^{p+1} e^{−(xt)²/2}` on `[0, 1]`.
pub fn g_t(t: f64, p: f64, x: f64) -> f64 {
    libm::pow(1.0 - x, p + 1.0) * libm::exp(-0.5 * (x * t) * (x * t))
}

/// The unique `x ∈ [0, 1]` with `g_t(x) = y`, by bisection (`g_t` decreases
/// strictly from 1 to 0).
pub fn g_inverse(t: f64, p: f64, y: f64, tol: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidArgument(format!("y = {y} must lie in [0, 1]")));
    }
    if !(t > 0.0) || !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("need t > 0 and p ≥ 1, got t={t}, p={p}")));
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    if y == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = g_t(t, p, mid);
        if libm::fabs(g - y) <= tol {
            return Ok(mid);
        }
        if g > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if libm::fabs(g_t(t, p, lo) - y) <= libm::fabs(g_t(t, p, hi) - y) { lo } else { hi })
}

/// `(√(2π) p)^{1/(p+1)} (1 − √(2β log t)/t) t^{1−β/(p+1)} ≥ ω_p`. False for
/// `t < 1`, where `log t < 0` and the expression is undefined.
pub fn tail_condition(q: &TailBoundQuery) -> bool {
    if q.t < 1.0 {
        return false;
    }
    let p1 = q.p + 1.0;
    let lhs = libm::pow(libm::sqrt(2.0 * core::f64::consts::PI) * q.p, 1.0 / p1)
        * (1.0 - libm::sqrt(2.0 * q.beta * libm::log(q.t)) / q.t)
        * libm::pow(q.t, 1.0 - q.beta / p1);
    lhs >= q.wp
}

/// Upper and lower deviation bounds with `C = p^{1/(p+1)} (1 + 1/p)`.
pub fn tail_bound(q: &TailBoundQuery) -> Result<TailBound> {
    if !(q.t > 0.0) || !(q.beta > 0.0) || !(q.p >= 1.0) || !(q.wp >= 0.0) || !q.wp.is_finite() {
        return Err(Error::InvalidArgument(format!("malformed tail query {q:?}")));
    }
    let p = q.p;
    let c = libm::pow(p, 1.0 / (p + 1.0)) * (1.0 + 1.0 / p);
    let wpow = libm::pow(q.wp, p / (p + 1.0));
    Ok(TailBound {
        query: *q,
        upper: c * wpow / libm::pow(q.t, 1.0 + q.beta * p / (p + 1.0)),
        lower: c / q.t * normal::pdf(q.t * p / (p + 1.0)) * wpow,
        condition_ok: tail_condition(q),
    })
}
