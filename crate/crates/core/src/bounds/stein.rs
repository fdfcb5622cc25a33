//! Numerical solution of the Stein equation `f'(w) − w f(w) = h(w) − Nh`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::normal;
use crate::quadrature::{Atom, GaussLegendre};
use crate::{Error, Result};

/// Quadrature settings for the Stein solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Panel width.
    pub panel_width: f64,
    /// The integration range stops where the Gaussian factor drops below
    /// this value.
    pub tail_cutoff: f64,
    /// Relative step for central differences: `h = diff_step · (1 + |w|)`.
    pub diff_step: f64,
    /// Polynomial growth order of `h`, used to widen the truncation.
    pub growth: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { nodes: 24, panel_width: 0.5, tail_cutoff: 1e-18, diff_step: 1e-5, growth: 4.0 }
    }
}

impl QuadSpec {
    fn validate(&self) -> Result<()> {
        if self.nodes < 2
            || !(self.panel_width > 0.0)
            || !(self.tail_cutoff > 0.0 && self.tail_cutoff < 1.0)
            || !(self.diff_step > 0.0)
            || !(self.growth >= 0.0)
        {
            return Err(Error::Quadrature(format!("invalid quadrature settings {self:?}")));
        }
        Ok(())
    }

    /// `−log` of the cutoff, widened for the growth of `h` near `scale`.
    fn log_cutoff(&self, scale: f64) -> f64 {
        -libm::log(self.tail_cutoff) + self.growth * libm::log(2.0 + scale)
    }
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature(format!("{what} did not converge to a finite value")))
    }
}

/// `Nh = E h(Z)` for standard normal `Z`, by Gauss–Legendre panels over the
/// range where the density exceeds the cutoff.
pub fn normal_expectation<H: FnMut(f64) -> f64>(mut h: H, quad: &QuadSpec) -> Result<f64> {
    quad.validate()?;
    let gl = GaussLegendre::new(quad.nodes);
    let l = libm::sqrt(2.0 * quad.log_cutoff(10.0));
    let panels = libm::ceil(2.0 * l / quad.panel_width) as usize;
    let v = gl.integrate_panels(-l, l, panels, |z| h(z) * normal::pdf(z));
    check_finite(v, "normal expectation")
}

/// `f_h(w)`, the bounded solution of the Stein equation, by quadrature in
/// the distance `s` from `w`:
///
/// * `w ≤ 0`: `f(w) = ∫₀^∞ e^{ws − s²/2} (h(w − s) − Nh) ds`;
/// * `w > 0`: `f(w) = −∫₀^∞ e^{−ws − s²/2} (h(w + s) − Nh) ds`.
///
/// Both forms integrate on the side where the exponent is non-positive.
pub fn stein_solve<H: Fn(f64) -> f64>(h: &H, nh: f64, w: f64, quad: &QuadSpec) -> Result<f64> {
    quad.validate()?;
    if !w.is_finite() || !nh.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite input w={w}, Nh={nh}")));
    }
    let a = libm::fabs(w);
    let lc = quad.log_cutoff(a);
    // Smallest s with a·s + s²/2 ≥ lc.
    let s_max = libm::sqrt(a * a + 2.0 * lc) - a;
    let panels = libm::ceil(s_max / quad.panel_width).max(1.0) as usize;
    let gl = GaussLegendre::new(quad.nodes);
    let v = if w <= 0.0 {
        gl.integrate_panels(0.0, s_max, panels, |s| libm::exp(w * s - 0.5 * s * s) * (h(w - s) - nh))
    } else {
        -gl.integrate_panels(0.0, s_max, panels, |s| libm::exp(-w * s - 0.5 * s * s) * (h(w + s) - nh))
    };
    check_finite(v, "Stein solution")
}

/// Law of `W` in a Stein residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WLaw {
    /// Finitely many atoms.
    Atoms(Vec<Atom>),
    /// `N(0, 1)`.
    StandardNormal,
}

/// `E[f_h'(W) − W f_h(W)] − (E h(W) − Nh)` with `f_h'` by central
/// differences. Zero up to discretisation error for every `W`.
pub fn stein_residual<H: Fn(f64) -> f64>(law: &WLaw, h: &H, nh: Option<f64>, quad: &QuadSpec) -> Result<f64> {
    let nh = match nh {
        Some(v) => v,
        None => normal_expectation(h, quad)?,
    };
    let point = |w: f64| -> Result<(f64, f64)> {
        let step = quad.diff_step * (1.0 + libm::fabs(w));
        let fp = (stein_solve(h, nh, w + step, quad)? - stein_solve(h, nh, w - step, quad)?) / (2.0 * step);
        let lhs = fp - w * stein_solve(h, nh, w, quad)?;
        Ok((lhs, h(w)))
    };
    let (lhs, eh) = match law {
        WLaw::Atoms(atoms) => {
            if atoms.is_empty() {
                return Err(Error::InvalidArgument("empty atom list".into()));
            }
            let mut lhs = 0.0;
            let mut eh = 0.0;
            for a in atoms {
                let (l, hv) = point(a.location)?;
                lhs += a.weight * l;
                eh += a.weight * hv;
            }
            (lhs, eh)
        }
        WLaw::StandardNormal => {
            let mut err = None;
            let lhs = normal_expectation(
                |w| match point(w) {
                    Ok((l, _)) => l,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                quad,
            );
            if let Some(e) = err {
                return Err(e);
            }
            (lhs?, nh)
        }
    };
    Ok(lhs - (eh - nh))
}
