//! Cumulant matching: an i.i.d. sum `V = q^{−1/2} Σ ξ_i` whose cumulants of
//! orders `3..=⌈p⌉+1` equal prescribed targets `u_j`.
//!
//! The construction picks `q`, assembles the cumulants of `ξ`
//! (`κ₁ = 0`, `κ₂ = 1`, `κ_{j+2} = q^{j/2} u_j`), converts them to moments,
//! sets free odd moments to zero, extends the even moments so every Hankel
//! determinant stays at least one, and realises the result as a finite-atom
//! law through the Jacobi matrix of its orthogonal polynomials. When the
//! Hankel check fails the constant `C_p` is halved and the construction
//! retried.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cumulants::{
    cumulants_from_moments, gaussian_moments, hamburger_feasible, hankel_det, moments_from_cumulants,
    CumulantSeq, Feasibility, MomentSeq, Rational, Scalar,
};
use crate::quadrature::{atom_moments, chebyshev_recurrence, golub_welsch, Atom};
use crate::{Error, Result};

/// Default starting constant for the verify-and-shrink loop.
pub const DEFAULT_C_P: f64 = 0.5;
/// Default number of halvings of `C_p` before giving up.
pub const DEFAULT_RETRIES: u32 = 20;

/// Targets for cumulant matching.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchTarget {
    /// The Wasserstein order `p ≥ 1`.
    pub p: f64,
    /// `(u₁,…,u_{k−1})`, the intended values `κ_{j+2}(W)`, with `k = ⌈p⌉`.
    pub u: Vec<f64>,
    /// Policy constant `C_p ∈ (0,1]`.
    pub c_p: f64,
    /// Size of the index set, used for the default `q` of the Gaussian branch.
    #[serde(default)]
    pub index_size: Option<u64>,
}

impl MatchTarget {
    /// Validated targets.
    pub fn new(p: f64, u: Vec<f64>, c_p: f64) -> Result<Self> {
        let t = MatchTarget { p, u, c_p, index_size: None };
        t.validate()?;
        Ok(t)
    }

    /// `k = ⌈p⌉`.
    pub fn k(&self) -> usize {
        libm::ceil(self.p) as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidArgument(format!("p = {} must be at least 1", self.p)));
        }
        if !(self.c_p > 0.0 && self.c_p <= 1.0) {
            return Err(Error::InvalidArgument(format!("C_p = {} must lie in (0,1]", self.c_p)));
        }
        if self.u.len() + 1 != self.k() {
            return Err(Error::InvalidArgument(format!(
                "expected {} targets for p = {}, got {}",
                self.k() - 1,
                self.p,
                self.u.len()
            )));
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("targets must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome of [`choose_q`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QChoice {
    /// All targets vanish: `ξ ~ N(0,1)` and any `q ≫ |I|` works.
    Gaussian {
        /// `|I|^{⌈2(p+1)/p⌉}` (saturating) when the index size is known.
        default_q: Option<u64>,
    },
    /// `q = ⌊min_j C_p² |u_j|^{−2/j}⌋`.
    Q(u64),
}

/// Chooses `q` as the largest integer not exceeding
/// `min_{j: u_j ≠ 0} C_p² |u_j|^{−2/j}`.
///
/// The floor tolerates a relative rounding error of `1e-12` so that values
/// like `0.25 · 0.01^{−2}` land on `2500`.
pub fn choose_q(target: &MatchTarget) -> Result<QChoice> {
    target.validate()?;
    let mut x = f64::INFINITY;
    for (idx, &u) in target.u.iter().enumerate() {
        if u != 0.0 {
            let j = (idx + 1) as f64;
            x = x.min(target.c_p * target.c_p * libm::pow(libm::fabs(u), -2.0 / j));
        }
    }
    if x.is_infinite() {
        let default_q = target.index_size.map(|n| {
            let e = libm::ceil(2.0 * (target.p + 1.0) / target.p) as u32;
            n.checked_pow(e).unwrap_or(u64::MAX)
        });
        return Ok(QChoice::Gaussian { default_q });
    }
    if x >= u64::MAX as f64 {
        return Ok(QChoice::Q(u64::MAX));
    }
    let mut q = libm::floor(x) as u64;
    if ((q + 1) as f64) <= x * (1.0 + 1e-12) {
        q += 1;
    }
    if q == 0 {
        return Err(Error::TargetsTooLarge { c_p: target.c_p });
    }
    Ok(QChoice::Q(q))
}

/// The moment-extension constant `C′ = (j+1)(j+1)! C^{j+2} + 1`.
///
/// `m` holds `μ₀..μ_{2j+1}`. Requires `|μ_ℓ| ≤ C` for every entry and
/// `H_j(μ₀..μ_{2j}) ≥ 1` (checked exactly); setting `μ_{2j+2} = C′` then
/// gives `H_{j+1} ≥ 1`.
pub fn extend_moments(m: &[f64], bound_c: f64) -> Result<f64> {
    if m.len() < 2 || m.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "moment extension needs μ₀..μ_(2j+1), got {} entries",
            m.len()
        )));
    }
    let j = (m.len() - 2) / 2;
    if let Some((l, v)) = m.iter().enumerate().find(|(_, v)| libm::fabs(**v) > bound_c) {
        return Err(Error::MomentPrecondition(format!("|μ_{l}| = {} exceeds C = {bound_c}", libm::fabs(*v))));
    }
    let exact = MomentSeq(m.iter().map(|&v| Rational::from_f64(v)).collect());
    let h = hankel_det(&exact, j)?;
    if h < Rational::from_i64(1) {
        return Err(Error::MomentPrecondition(format!("H_{j} = {} < 1", h.to_f64())));
    }
    let fact: f64 = (1..=j + 1).map(|i| i as f64).product();
    Ok((j + 1) as f64 * fact * libm::pow(bound_c, (j + 2) as f64) + 1.0)
}

/// Result of [`build_match`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// The chosen `q` (the default for the Gaussian branch, if known).
    pub q: Option<u64>,
    /// `true` when all targets vanished and `ξ` is standard normal.
    pub gaussian_branch: bool,
    /// The constant `C_p` that passed verification.
    pub c_p_used: f64,
    /// How many times `C_p` was halved.
    pub retries: u32,
    /// `κ₁..κ_{k+1}` of `ξ`.
    pub xi_cumulants: CumulantSeq<f64>,
    /// `μ₀..μ_{realizeOrder}` of `ξ` (extended where free).
    pub xi_moments: MomentSeq<f64>,
    /// `H₀..H_{realizeOrder/2}` of `xi_moments`.
    pub hankel_dets: Vec<f64>,
    /// Finite-atom law reproducing `μ₀..μ_{realizeOrder−1}`.
    pub atoms: Vec<Atom>,
    /// `E|ξ|^{p+2}`.
    pub abs_moment: f64,
    /// `μ_{2⌈k/2⌉+2}^{(p+2)/(2⌈k/2⌉+2)}`, which dominates `abs_moment`.
    pub abs_moment_bound: f64,
    /// Lower bound `C_p^p / 2^{p/2}` on `max_j |κ_{j+2}(ξ)|` when nonzero.
    pub kappa_lower_bound: f64,
}

/// Builds the matching law with the default starting constant in `target`
/// and [`DEFAULT_RETRIES`] halvings.
pub fn build_match(target: &MatchTarget, realize_order: usize) -> Result<MatchResult> {
    build_match_with(target, realize_order, DEFAULT_RETRIES)
}

/// The smallest admissible even `realizeOrder ≥ k + 3`.
pub fn default_realize_order(p: f64) -> usize {
    let k = libm::ceil(p) as usize;
    (k + 3).div_ceil(2) * 2
}

/// [`build_match`] with an explicit retry budget.
pub fn build_match_with(target: &MatchTarget, realize_order: usize, max_retries: u32) -> Result<MatchResult> {
    target.validate()?;
    let k = target.k();
    if realize_order < k + 3 || realize_order % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "realizeOrder = {realize_order} must be even and at least k + 3 = {}",
            k + 3
        )));
    }
    let mut t = target.clone();
    for attempt in 0..=max_retries {
        match choose_q(&t)? {
            QChoice::Gaussian { default_q } => return gaussian_match(&t, default_q, realize_order),
            QChoice::Q(q) => {
                if let Some(mut r) = try_match(&t, q, realize_order)? {
                    r.retries = attempt;
                    return Ok(r);
                }
            }
        }
        t.c_p *= 0.5;
    }
    Err(Error::MatchInfeasible { retries: max_retries })
}

fn exact_hankels(mu: &[f64]) -> Result<(Vec<f64>, bool)> {
    let exact = MomentSeq(mu.iter().map(|&v| Rational::from_f64(v)).collect());
    let one = Rational::from_i64(1);
    let mut dets = Vec::new();
    let mut ok = true;
    for j in 0..=(exact.order() / 2) {
        let h = hankel_det(&exact, j)?;
        ok &= h >= one;
        dets.push(h.to_f64());
    }
    Ok((dets, ok))
}

fn try_match(t: &MatchTarget, q: u64, realize_order: usize) -> Result<Option<MatchResult>> {
    let k = t.k();
    let qf = q as f64;
    let mut kappa = alloc::vec![0.0, 1.0];
    for (idx, &u) in t.u.iter().enumerate() {
        kappa.push(libm::pow(qf, (idx + 1) as f64 / 2.0) * u);
    }
    let kappa = CumulantSeq(kappa);
    let mut mu = moments_from_cumulants(&kappa).0;
    while mu.len() <= realize_order {
        let n = mu.len();
        if n % 2 == 1 {
            mu.push(0.0);
        } else {
            let c = mu.iter().fold(1.0f64, |a, v| a.max(libm::fabs(*v)));
            match extend_moments(&mu, c) {
                Ok(next) => mu.push(next),
                Err(Error::MomentPrecondition(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    }
    let (hankel_dets, ok) = exact_hankels(&mu)?;
    if !ok {
        return Ok(None);
    }
    let xi_moments = MomentSeq(mu);
    let atoms = realize_atomic(&MomentSeq(xi_moments.0[..realize_order].to_vec()))?;
    // Reconstruction of the matched cumulants from the atoms.
    let realized = cumulants_from_moments(&MomentSeq(atom_moments(&atoms, k + 1)))?;
    for j in 1..=(k + 1) {
        let want = *kappa.get(j);
        let got = *realized.get(j);
        if libm::fabs(got - want) > 1e-9 * want.abs().max(1.0) {
            return Err(Error::NumericalBreakdown { order: j });
        }
    }
    let abs_moment = atoms
        .iter()
        .map(|a| a.weight * libm::pow(libm::fabs(a.location), t.p + 2.0))
        .sum();
    let top = 2 * k.div_ceil(2) + 2;
    let abs_moment_bound = libm::pow(xi_moments.0[top], (t.p + 2.0) / top as f64);
    Ok(Some(MatchResult {
        q: Some(q),
        gaussian_branch: false,
        c_p_used: t.c_p,
        retries: 0,
        xi_cumulants: kappa,
        xi_moments,
        hankel_dets,
        atoms,
        abs_moment,
        abs_moment_bound,
        kappa_lower_bound: libm::pow(t.c_p, t.p) / libm::pow(2.0, t.p / 2.0),
    }))
}

fn gaussian_match(t: &MatchTarget, default_q: Option<u64>, realize_order: usize) -> Result<MatchResult> {
    let k = t.k();
    let xi_moments: MomentSeq<f64> = gaussian_moments(realize_order);
    let (hankel_dets, _) = exact_hankels(&xi_moments.0)?;
    let atoms = realize_atomic(&MomentSeq(xi_moments.0[..realize_order].to_vec()))?;
    let mut kappa = alloc::vec![0.0; k + 1];
    kappa[1] = 1.0;
    let r = t.p + 2.0;
    // E|Z|^r = 2^{r/2} Γ((r+1)/2) / √π.
    let abs_moment = libm::pow(2.0, r / 2.0) * libm::tgamma((r + 1.0) / 2.0) / libm::sqrt(core::f64::consts::PI);
    let top = 2 * k.div_ceil(2) + 2;
    Ok(MatchResult {
        q: default_q,
        gaussian_branch: true,
        c_p_used: t.c_p,
        retries: 0,
        xi_cumulants: CumulantSeq(kappa),
        abs_moment_bound: libm::pow(xi_moments.0[top], r / top as f64),
        xi_moments,
        hankel_dets,
        atoms,
        abs_moment,
        kappa_lower_bound: libm::pow(t.c_p, t.p) / libm::pow(2.0, t.p / 2.0),
    })
}

/// A finite-atom law with moments `μ₀..μ_{2s+1}`: `s+1` atoms from the Gauss
/// rule of the moment sequence (fewer when the sequence sits on the
/// boundary of the moment cone). If the input has even top order the last
/// entry is ignored.
pub fn realize_atomic(m: &MomentSeq<f64>) -> Result<Vec<Atom>> {
    let mu = &m.0;
    if mu.len() < 2 {
        return Err(Error::InsufficientOrder { needed: 1, available: m.order() });
    }
    if mu[0] != 1.0 {
        return Err(Error::MomentPrecondition("μ₀ must equal 1".into()));
    }
    let usable = mu.len() / 2 * 2;
    let mu = &mu[..usable];
    let s = usable / 2 - 1;
    if let Feasibility::Infeasible { order } = hamburger_feasible(&MomentSeq(mu[..=2 * s].to_vec()))? {
        return Err(Error::Infeasible { order });
    }
    let (alpha, beta) = chebyshev_recurrence(mu, s + 1, 1e-12)?;
    let atoms = golub_welsch(&alpha, &beta)?;
    let got = atom_moments(&atoms, usable - 1);
    for (j, (&g, &w)) in got.iter().zip(mu).enumerate() {
        let lo = mu[2 * (j / 2)];
        let hi = mu.get(2 * j.div_ceil(2)).copied().unwrap_or(lo);
        let scale = w.abs().max(lo.abs()).max(hi.abs()).max(1.0);
        if libm::fabs(g - w) > 1e-9 * scale {
            return Err(Error::NumericalBreakdown { order: j });
        }
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choose_q_examples() {
        let t = MatchTarget::new(3.0, alloc::vec![0.0, 0.0], 0.5).unwrap();
        assert_eq!(choose_q(&t).unwrap(), QChoice::Gaussian { default_q: None });
        let t = MatchTarget::new(2.0, alloc::vec![0.01], 0.5).unwrap();
        assert_eq!(choose_q(&t).unwrap(), QChoice::Q(2500));
        let t = MatchTarget::new(3.0, alloc::vec![0.1, 0.1], 1.0).unwrap();
        assert_eq!(choose_q(&t).unwrap(), QChoice::Q(10));
        assert!(MatchTarget::new(3.0, alloc::vec![0.1, 0.1], 1.5).is_err());
        let t = MatchTarget::new(2.0, alloc::vec![10.0], 0.5).unwrap();
        assert_eq!(choose_q(&t), Err(Error::TargetsTooLarge { c_p: 0.5 }));
        let mut t = MatchTarget::new(2.0, alloc::vec![0.0], 0.5).unwrap();
        t.index_size = Some(10);
        assert_eq!(choose_q(&t).unwrap(), QChoice::Gaussian { default_q: Some(1000) });
    }

    #[test]
    fn extend_examples() {
        let c = extend_moments(&[1.0, 0.0, 1.0, 0.0], 1.0).unwrap();
        assert_eq!(c, 5.0);
        let h = hankel_det(&MomentSeq(alloc::vec![1.0, 0.0, 1.0, 0.0, 5.0]), 2).unwrap();
        assert_eq!(h, 4.0);
        // j = 2, C = 3: 3·3!·3⁴ + 1.
        let mu = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0];
        assert_eq!(extend_moments(&mu, 3.0).unwrap(), 1459.0);
        assert!(extend_moments(&mu, 2.0).is_err());
        let mut last = 0.0;
        for c in [1.0, 1.5, 2.0, 4.0] {
            let v = extend_moments(&[1.0, 0.0, 1.0, 0.0], c).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn realize_examples() {
        let two = realize_atomic(&MomentSeq(alloc::vec![1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(two.len(), 2);
        assert!((two[0].location + 1.0).abs() < 1e-14 && (two[1].location - 1.0).abs() < 1e-14);
        assert!((two[0].weight - 0.5).abs() < 1e-14);
        let point = realize_atomic(&MomentSeq(alloc::vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(point.len(), 1);
        assert!(point[0].location.abs() < 1e-15 && (point[0].weight - 1.0).abs() < 1e-15);
        let gh = realize_atomic(&gaussian_moments(5)).unwrap();
        let s3 = libm::sqrt(3.0);
        for (a, (x, w)) in gh.iter().zip([(-s3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (s3, 1.0 / 6.0)]) {
            assert!((a.location - x).abs() < 1e-13 && (a.weight - w).abs() < 1e-13);
        }
        assert_eq!(
            realize_atomic(&MomentSeq(alloc::vec![1.0, 0.0, 0.5, 0.0, 0.1, 0.0])),
            Err(Error::Infeasible { order: 2 })
        );
    }

    #[test]
    fn build_match_examples() {
        let g = build_match(&MatchTarget::new(3.0, alloc::vec![0.0, 0.0], 0.5).unwrap(), 6).unwrap();
        assert!(g.gaussian_branch);
        assert_eq!(g.atoms.len(), 3);
        let r = build_match(&MatchTarget::new(2.0, alloc::vec![0.01], 0.5).unwrap(), 6).unwrap();
        assert_eq!(r.q, Some(2500));
        let realized = cumulants_from_moments(&MomentSeq(atom_moments(&r.atoms, 3))).unwrap();
        assert!((realized.get(3) - 50.0 * 0.01).abs() < 1e-10);
        for h in &r.hankel_dets {
            assert!(*h >= 1.0);
        }
        assert!(r.abs_moment.is_finite() && r.abs_moment <= r.abs_moment_bound);
        assert!(build_match(&MatchTarget::new(2.0, alloc::vec![0.01], 0.5).unwrap(), 5).is_err());
    }

    #[test]
    fn shrinking_is_reported() {
        // At C_p = 1: q = 100, κ₃ = 0.1, κ₄ = −1, so H₂ = 2 + κ₄ − κ₃² < 1.
        // One halving gives q = 25 and H₂ = 1.7475.
        let t = MatchTarget::new(3.0, alloc::vec![0.01, -0.01], 1.0).unwrap();
        let r = build_match(&t, 6).unwrap();
        assert_eq!(r.retries, 1);
        assert_eq!(r.c_p_used, 0.5);
        assert_eq!(r.q, Some(25));
        for h in &r.hankel_dets {
            assert!(*h >= 1.0);
        }
        // Targets too large for any admissible q.
        let big = MatchTarget::new(3.0, alloc::vec![-0.9, -0.9], 0.9).unwrap();
        assert_eq!(build_match(&big, 6).unwrap_err(), Error::TargetsTooLarge { c_p: 0.9 });
    }
}
