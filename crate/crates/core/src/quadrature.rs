//! Quadrature: Gauss–Legendre panels, and Gauss rules built from moments
//! (Chebyshev algorithm + Golub–Welsch).

use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::tridiagonal_eigen;
use crate::{Error, Result};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if libm::fabs(dx) < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        GaussLegendre { nodes, weights }
    }

    /// `∫_a^b f` with this rule on a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// `∫_a^b f` over `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(lo, hi, &mut f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A point mass of a finite-atom law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Location.
    pub location: f64,
    /// Probability weight.
    pub weight: f64,
}

/// Three-term recurrence coefficients `(α_k, β_k)` of the monic orthogonal
/// polynomials of a measure, from its moments `μ₀..μ_{2n−1}` by the
/// Chebyshev algorithm. Returns up to `n` pairs; stops early (returning the
/// coefficients computed so far) when `β_k` vanishes to `rel_tol`, which
/// signals a measure with only `k` support points.
pub fn chebyshev_recurrence(mu: &[f64], n: usize, rel_tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || mu.len() < 2 * n {
        return Err(Error::InsufficientOrder { needed: 2 * n - 1, available: mu.len().saturating_sub(1) });
    }
    if mu[0] <= 0.0 {
        return Err(Error::NumericalBreakdown { order: 0 });
    }
    let width = 2 * n;
    let mut sig_prev = alloc::vec![0.0; width];
    let mut sig = mu[..width].to_vec();
    let mut alpha = alloc::vec![mu[1] / mu[0]];
    let mut beta = alloc::vec![mu[0]];
    let mut scale = mu[0];
    for k in 1..n {
        let mut next = alloc::vec![0.0; width];
        for l in k..(width - k) {
            next[l] = sig[l + 1] - alpha[k - 1] * sig[l] - beta[k - 1] * sig_prev[l];
        }
        let b = next[k] / sig[k - 1];
        scale = scale.max(libm::fabs(alpha[k - 1]) + libm::sqrt(beta[k - 1].max(0.0))).max(1.0);
        if libm::fabs(b) <= rel_tol * scale * scale {
            return Ok((alpha, beta));
        }
        if b < 0.0 || !b.is_finite() {
            return Err(Error::NumericalBreakdown { order: k });
        }
        alpha.push(next[k + 1] / next[k] - sig[k] / sig[k - 1]);
        beta.push(b);
        sig_prev = sig;
        sig = next;
    }
    Ok((alpha, beta))
}

/// Gauss rule (nodes and weights) of the Jacobi matrix `(α, √β₁..)`,
/// scaled by the total mass `β₀`.
pub fn golub_welsch(alpha: &[f64], beta: &[f64]) -> Result<Vec<Atom>> {
    if alpha.is_empty() || alpha.len() != beta.len() {
        return Err(Error::InvalidArgument("recurrence coefficient lengths differ".into()));
    }
    let off: Vec<f64> = beta[1..].iter().map(|b| libm::sqrt(*b)).collect();
    let ev = tridiagonal_eigen(alpha, &off)?;
    Ok(ev
        .into_iter()
        .map(|(location, v)| Atom { location, weight: beta[0] * v * v })
        .collect())
}

/// Raw moments `Σ w a^j` of a finite-atom law through `order`.
pub fn atom_moments(atoms: &[Atom], order: usize) -> Vec<f64> {
    let mut mu = alloc::vec![0.0; order + 1];
    for a in atoms {
        let mut p = a.weight;
        for m in mu.iter_mut() {
            *m += p;
            p *= a.location;
        }
    }
    mu
}
