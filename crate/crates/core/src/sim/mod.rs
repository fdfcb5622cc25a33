//! Monte Carlo generators for m-dependent moving-average fields and
//! U-statistics, empirical Wasserstein distances to `N(0,1)` and log–log
//! rate fits.
//!
//! Draws of the standardised sum come in batches of [`BATCH`] replicates;
//! batch `b` uses the stream `(seed, TAG_SUM, b)`, so a sample is the same
//! however batches are distributed over threads.

mod stats;

pub use stats::{
    check_sizes, fit_rate, points_from_sample, rate_experiment, rate_points, tail_points, tail_probability,
    wasserstein_to_normal, wasserstein_two_sample, EmpiricalDist, RateFit, RatePoint, TailPoint, RATE_GROUPS,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::depgraph::DependencyGraph;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Replicates per sampling batch.
pub const BATCH: u64 = 4096;

/// Mean-zero, unit-variance innovation laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationLaw {
    /// `±1` with probability ½ each.
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// `Exp(1) − 1` (skewed, heavier right tail).
    ShiftedExp,
    /// `N(0, 1)`.
    Gaussian,
}

impl InnovationLaw {
    /// One draw.
    pub fn sample(self, s: &mut Stream) -> f64 {
        match self {
            InnovationLaw::Rademacher => {
                if s.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationLaw::Uniform => (2.0 * s.random::<f64>() - 1.0) * libm::sqrt(3.0),
            InnovationLaw::ShiftedExp => {
                let e: f64 = Exp1.sample(s);
                e - 1.0
            }
            InnovationLaw::Gaussian => StandardNormal.sample(s),
        }
    }

    /// `E ε⁴`.
    pub fn fourth_moment(self) -> f64 {
        match self {
            InnovationLaw::Rademacher => 1.0,
            InnovationLaw::Uniform => 1.8,
            InnovationLaw::ShiftedExp => 9.0,
            InnovationLaw::Gaussian => 3.0,
        }
    }

    /// Parses `rademacher`, `uniform`, `shifted_exp` or `gaussian`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rademacher" => Ok(InnovationLaw::Rademacher),
            "uniform" => Ok(InnovationLaw::Uniform),
            "shifted_exp" => Ok(InnovationLaw::ShiftedExp),
            "gaussian" => Ok(InnovationLaw::Gaussian),
            _ => Err(Error::InvalidArgument(format!("unknown innovation law '{name}'"))),
        }
    }
}

/// Built-in mean-zero U-statistic kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `h(x, y) = x + y`; projection `g(x) = x`.
    Sum,
    /// `h(x, y) = xy + x + y`; projection `g(x) = x`.
    Mixed,
    /// `h(x, y) = (x − y)²/2 − 1`; projection `g(x) = (x² − 1)/2`, which
    /// vanishes under the Rademacher law.
    Variance,
}

impl Kernel {
    /// `h(x, y)`.
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Sum => x + y,
            Kernel::Mixed => x * y + x + y,
            Kernel::Variance => 0.5 * (x - y) * (x - y) - 1.0,
        }
    }

    /// `(ζ₁, ζ₂) = (Var g(X), Var h(X, Y))` under `law`.
    pub fn zetas(self, law: InnovationLaw) -> (f64, f64) {
        match self {
            Kernel::Sum => (1.0, 2.0),
            Kernel::Mixed => (1.0, 3.0),
            Kernel::Variance => {
                let m4 = law.fourth_moment();
                ((m4 - 1.0) / 4.0, (m4 - 1.0) / 2.0 + 1.0)
            }
        }
    }

    /// `Σ_{i<j} h(x_i, x_j)` from the power sums `S₁ = Σx`, `S₂ = Σx²`.
    pub fn from_power_sums(self, n: usize, s1: f64, s2: f64) -> f64 {
        let nf = n as f64;
        let cross = 0.5 * (s1 * s1 - s2);
        match self {
            Kernel::Sum => (nf - 1.0) * s1,
            Kernel::Mixed => cross + (nf - 1.0) * s1,
            Kernel::Variance => 0.5 * (nf - 1.0) * s2 - cross - 0.5 * nf * (nf - 1.0),
        }
    }

    /// Parses `sum`, `mixed` or `variance`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sum" => Ok(Kernel::Sum),
            "mixed" => Ok(Kernel::Mixed),
            "variance" => Ok(Kernel::Variance),
            _ => Err(Error::InvalidArgument(format!("unknown kernel '{name}'"))),
        }
    }
}

/// A generator of `W = σ⁻¹ Σ X_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Moving average on the box `{0,…,side−1}^d`:
    /// `X_i = (m+1)^{−d/2} Σ_{δ ∈ {0,…,m}^d} ε_{i+δ}`, which is m-dependent
    /// in the max-norm.
    MdepMa {
        /// Dimension.
        d: usize,
        /// Box side length.
        side: usize,
        /// Window radius.
        m: usize,
        /// Innovation law.
        law: InnovationLaw,
    },
    /// Hoeffding U-statistic `Σ_{i<j} h(ε_i, ε_j)` over `n` innovations.
    UStat {
        /// Kernel.
        kernel: Kernel,
        /// Innovation law.
        law: InnovationLaw,
        /// Number of innovations.
        n: usize,
    },
    /// `W = ε` at every size (a family that does not converge to the
    /// normal law unless `law` is Gaussian).
    Fixed {
        /// Innovation law.
        law: InnovationLaw,
    },
}

impl GeneratorSpec {
    /// The same family at a different size: the side length, `n`, or
    /// nothing for [`GeneratorSpec::Fixed`].
    pub fn with_size(&self, size: usize) -> Self {
        match *self {
            GeneratorSpec::MdepMa { d, m, law, .. } => GeneratorSpec::MdepMa { d, side: size, m, law },
            GeneratorSpec::UStat { kernel, law, .. } => GeneratorSpec::UStat { kernel, law, n: size },
            f @ GeneratorSpec::Fixed { .. } => f,
        }
    }

    /// Abscissa of rate fits for the family at `size`: the number of sites
    /// `side^d` for fields and `n` for U-statistics (whose distance decays
    /// like `n^{−1/2}`).
    pub fn rate_scale(&self, size: usize) -> usize {
        match *self {
            GeneratorSpec::MdepMa { d, .. } => size.pow(d as u32),
            GeneratorSpec::UStat { .. } | GeneratorSpec::Fixed { .. } => size,
        }
    }

    /// Number of summands `|I|`.
    pub fn index_size(&self) -> usize {
        match *self {
            GeneratorSpec::MdepMa { d, side, .. } => side.pow(d as u32),
            GeneratorSpec::UStat { n, .. } => n * n.saturating_sub(1) / 2,
            GeneratorSpec::Fixed { .. } => 1,
        }
    }

    /// Checks parameters and non-degeneracy.
    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorSpec::MdepMa { d, side, .. } => {
                if d == 0 || side == 0 {
                    return Err(Error::InvalidArgument("m-dependent field needs d ≥ 1 and side ≥ 1".into()));
                }
            }
            GeneratorSpec::UStat { kernel, law, n } => {
                if n < 2 {
                    return Err(Error::InvalidArgument("U-statistic needs n ≥ 2".into()));
                }
                if kernel == Kernel::Variance && law == InnovationLaw::Rademacher {
                    return Err(Error::InvalidArgument(
                        "the variance kernel is degenerate under the Rademacher law".into(),
                    ));
                }
            }
            GeneratorSpec::Fixed { .. } => {}
        }
        Ok(())
    }

    /// `σ = sd(Σ X_i)` in closed form.
    pub fn sigma(&self) -> Result<f64> {
        self.validate()?;
        let var = match *self {
            GeneratorSpec::MdepMa { d, side, m, .. } => {
                let per_dim: f64 = multiplicities(side, m).iter().map(|&c| (c * c) as f64).sum();
                libm::pow(per_dim / (m + 1) as f64, d as f64)
            }
            GeneratorSpec::UStat { kernel, law, n } => {
                let (z1, z2) = kernel.zetas(law);
                let pairs = (n * (n - 1) / 2) as f64;
                pairs * (z2 + 2.0 * (n as f64 - 2.0) * z1)
            }
            GeneratorSpec::Fixed { .. } => 1.0,
        };
        if !(var > 0.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(libm::sqrt(var))
    }

    /// The dependency graph of the summands.
    pub fn graph(&self) -> Result<DependencyGraph> {
        self.validate()?;
        match *self {
            GeneratorSpec::MdepMa { d, side, m, .. } => {
                DependencyGraph::m_dependent_lattice(&lattice_points(d, side), m as u64)
            }
            GeneratorSpec::UStat { n, .. } => DependencyGraph::u_stat(n, 2, false),
            GeneratorSpec::Fixed { .. } => {
                DependencyGraph::from_edge_list(&[], Some(&[crate::depgraph::VertexId::int(0)]))
            }
        }
    }

    /// Raw summands `X_i`, ordered like the vertices of [`GeneratorSpec::graph`].
    pub fn sample_field(&self, s: &mut Stream) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match *self {
            GeneratorSpec::MdepMa { d, side, m, law } => {
                let ext = side + m;
                let eps: Vec<f64> = (0..ext.pow(d as u32)).map(|_| law.sample(s)).collect();
                let mut field = window_sums(eps, d, ext, m);
                let scale = libm::pow((m + 1) as f64, -(d as f64) / 2.0);
                for v in field.iter_mut() {
                    *v *= scale;
                }
                field
            }
            GeneratorSpec::UStat { kernel, law, n } => {
                let eps: Vec<f64> = (0..n).map(|_| law.sample(s)).collect();
                let mut out = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in i + 1..n {
                        out.push(kernel.eval(eps[i], eps[j]));
                    }
                }
                out
            }
            GeneratorSpec::Fixed { law } => vec![law.sample(s)],
        })
    }

    /// One draw of the unstandardised sum `Σ X_i`, without materialising
    /// the field.
    fn sample_sum(&self, plan: &SumPlan, s: &mut Stream) -> f64 {
        match (*self, plan) {
            (GeneratorSpec::MdepMa { d, m, law, .. }, SumPlan::Multiplicities(groups)) => {
                let mut acc = 0.0;
                for (c, count, binom) in groups {
                    let group = match (law, binom) {
                        (InnovationLaw::Rademacher, Some(b)) => 2.0 * b.sample(s) as f64 - *count as f64,
                        (InnovationLaw::Gaussian, _) => {
                            let z: f64 = StandardNormal.sample(s);
                            z * libm::sqrt(*count as f64)
                        }
                        _ => (0..*count).map(|_| law.sample(s)).sum(),
                    };
                    acc += *c as f64 * group;
                }
                acc * libm::pow((m + 1) as f64, -(d as f64) / 2.0)
            }
            (GeneratorSpec::UStat { kernel, law, n }, SumPlan::Binomial(b)) => {
                debug_assert_eq!(law, InnovationLaw::Rademacher);
                let s1 = 2.0 * b.sample(s) as f64 - n as f64;
                kernel.from_power_sums(n, s1, n as f64)
            }
            (GeneratorSpec::UStat { kernel, law, n }, _) => {
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    let x = law.sample(s);
                    s1 += x;
                    s2 += x * x;
                }
                kernel.from_power_sums(n, s1, s2)
            }
            (GeneratorSpec::Fixed { law }, _) => law.sample(s),
            _ => unreachable!("sampling plan does not match generator"),
        }
    }

    fn plan(&self) -> Result<SumPlan> {
        self.validate()?;
        Ok(match *self {
            GeneratorSpec::MdepMa { d, side, m, .. } => {
                // Each innovation enters the sum with multiplicity
                // ∏_dims c(j_k); group innovations by multiplicity.
                let per_dim = multiplicities(side, m);
                let mut counts: alloc::collections::BTreeMap<u64, u64> = alloc::collections::BTreeMap::new();
                let mut acc: alloc::collections::BTreeMap<u64, u64> = alloc::collections::BTreeMap::new();
                acc.insert(1, 1);
                for _ in 0..d {
                    counts.clear();
                    for (&c, &k) in &acc {
                        for &cj in &per_dim {
                            *counts.entry(c * cj).or_default() += k;
                        }
                    }
                    core::mem::swap(&mut counts, &mut acc);
                }
                let groups = acc
                    .into_iter()
                    .map(|(c, k)| {
                        let b = Binomial::new(k, 0.5)
                            .map_err(|e| Error::InvalidArgument(format!("binomial({k}, ½): {e}")))?;
                        Ok((c, k, Some(b)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                SumPlan::Multiplicities(groups)
            }
            GeneratorSpec::UStat { law: InnovationLaw::Rademacher, n, .. } => SumPlan::Binomial(
                Binomial::new(n as u64, 0.5).map_err(|e| Error::InvalidArgument(format!("binomial({n}, ½): {e}")))?,
            ),
            _ => SumPlan::Direct,
        })
    }
}

enum SumPlan {
    /// `(multiplicity, count, binomial(count, ½))` groups of innovations.
    Multiplicities(Vec<(u64, u64, Option<Binomial>)>),
    /// Rademacher U-statistic: `S₁ = 2·Bin(n, ½) − n`, `S₂ = n`.
    Binomial(Binomial),
    Direct,
}

/// Per-dimension multiplicities `c(j) = min(j, side−1) − max(0, j−m) + 1`
/// of the innovations `j = 0,…,side+m−1`.
fn multiplicities(side: usize, m: usize) -> Vec<u64> {
    (0..side + m).map(|j| (j.min(side - 1) - j.saturating_sub(m) + 1) as u64).collect()
}

/// Lattice points of `{0,…,side−1}^d` in lexicographic order.
pub fn lattice_points(d: usize, side: usize) -> Vec<Vec<i64>> {
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0i64; d];
            for k in (0..d).rev() {
                p[k] = (idx % side) as i64;
                idx /= side;
            }
            p
        })
        .collect()
}

/// Sums of `{0..m}^d` windows of a row-major array with extent `ext` per
/// dimension, giving extent `ext − m`.
fn window_sums(mut a: Vec<f64>, d: usize, ext: usize, m: usize) -> Vec<f64> {
    let side = ext - m;
    let mut shape = vec![ext; d];
    for axis in 0..d {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        let mut out = vec![0.0; outer * side * inner];
        for o in 0..outer {
            for i in 0..inner {
                for j in 0..side {
                    let mut acc = 0.0;
                    for k in j..=j + m {
                        acc += a[(o * len + k) * inner + i];
                    }
                    out[(o * side + j) * inner + i] = acc;
                }
            }
        }
        shape[axis] = side;
        a = out;
    }
    a
}

/// Standardised sums of one batch: `count` draws from stream
/// `(seed, TAG_SUM, batch)`.
pub fn sample_w_batch(spec: &GeneratorSpec, seed: u64, batch: u64, count: u64) -> Result<Vec<f64>> {
    let sigma = spec.sigma()?;
    let plan = spec.plan()?;
    let mut s = rng::stream(seed, &[rng::TAG_SUM, batch]);
    Ok((0..count).map(|_| spec.sample_sum(&plan, &mut s) / sigma).collect())
}

/// Batch sizes covering `reps` replicates.
pub fn batches(reps: u64) -> impl Iterator<Item = (u64, u64)> {
    let n = reps.div_ceil(BATCH);
    (0..n).map(move |b| (b, BATCH.min(reps - b * BATCH)))
}

/// `reps` i.i.d. draws of `W = σ⁻¹ Σ X_i` (σ in closed form).
pub fn sample_w(spec: &GeneratorSpec, reps: u64, seed: u64) -> Result<EmpiricalDist> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let mut all = Vec::with_capacity(reps as usize);
    for (b, count) in batches(reps) {
        all.extend(sample_w_batch(spec, seed, b, count)?);
    }
    Ok(EmpiricalDist::new(all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mdep_single_site_is_innovation() {
        let spec = GeneratorSpec::MdepMa { d: 1, side: 1, m: 0, law: InnovationLaw::Rademacher };
        let d = sample_w(&spec, 100, 1).unwrap();
        assert!(d.sorted().iter().all(|v| *v == 1.0 || *v == -1.0));
    }

    #[test]
    fn mdep_sigma_matches_covariance_algebra() {
        // MA(1): Var ΣX = (1/2)·(1 + 4(n−1) + 1) for n sites.
        for n in [1usize, 2, 5, 40] {
            let spec = GeneratorSpec::MdepMa { d: 1, side: n, m: 1, law: InnovationLaw::Rademacher };
            let want = 0.5 * (2.0 + 4.0 * (n as f64 - 1.0));
            assert!((spec.sigma().unwrap().powi(2) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_sum_matches_field_sum_in_distribution() {
        let spec = GeneratorSpec::MdepMa { d: 2, side: 5, m: 1, law: InnovationLaw::Uniform };
        let sigma = spec.sigma().unwrap();
        let mut s = rng::stream(3, &[]);
        let reps = 20000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let f: f64 = spec.sample_field(&mut s).unwrap().iter().sum();
            acc += f * f;
        }
        let var = acc / reps as f64 / (sigma * sigma);
        assert!((var - 1.0).abs() < 4.0 * libm::sqrt(2.0 / reps as f64), "{var}");
        let w = sample_w(&spec, 20000, 4).unwrap();
        let v2 = w.sorted().iter().map(|x| x * x).sum::<f64>() / 20000.0;
        assert!((v2 - 1.0).abs() < 4.0 * libm::sqrt(2.0 / 20000.0), "{v2}");
    }

    #[test]
    fn window_sums_match_direct_definition() {
        let ext = 4;
        let a: Vec<f64> = (0..ext * ext).map(|v| v as f64).collect();
        let out = window_sums(a.clone(), 2, ext, 1);
        for i in 0..3 {
            for j in 0..3 {
                let want = a[i * ext + j] + a[i * ext + j + 1] + a[(i + 1) * ext + j] + a[(i + 1) * ext + j + 1];
                assert_eq!(out[i * 3 + j], want);
            }
        }
    }

    #[test]
    fn ustat_power_sums_match_pairs() {
        let xs = [0.3, -1.2, 2.0, 0.5, -0.7];
        let s1: f64 = xs.iter().sum();
        let s2: f64 = xs.iter().map(|x| x * x).sum();
        for k in [Kernel::Sum, Kernel::Mixed, Kernel::Variance] {
            let mut direct = 0.0;
            for i in 0..xs.len() {
                for j in i + 1..xs.len() {
                    direct += k.eval(xs[i], xs[j]);
                }
            }
            assert!((k.from_power_sums(xs.len(), s1, s2) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn ustat_sum_kernel_is_rescaled_iid_sum() {
        // Σ_{i<j}(x_i+x_j) = (n−1)Σx_i, so W = Σx_i/√n.
        let spec = GeneratorSpec::UStat { kernel: Kernel::Sum, law: InnovationLaw::Rademacher, n: 9 };
        let d = sample_w(&spec, 2000, 2).unwrap();
        for v in d.sorted() {
            let s = v * 3.0;
            assert!((s - libm::round(s)).abs() < 1e-9 && (libm::round(s) as i64 - 9).rem_euclid(2) == 0);
        }
        assert!(GeneratorSpec::UStat { kernel: Kernel::Variance, law: InnovationLaw::Rademacher, n: 5 }
            .sigma()
            .is_err());
    }

    #[test]
    fn ustat_sigma_matches_field_variance() {
        let spec = GeneratorSpec::UStat { kernel: Kernel::Variance, law: InnovationLaw::Uniform, n: 6 };
        let sigma = spec.sigma().unwrap();
        let mut s = rng::stream(9, &[]);
        let reps = 40000;
        let mut acc = 0.0;
        for _ in 0..reps {
            let f: f64 = spec.sample_field(&mut s).unwrap().iter().sum();
            acc += f * f;
        }
        let ratio = acc / reps as f64 / (sigma * sigma);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn lattice_order_matches_graph() {
        let spec = GeneratorSpec::MdepMa { d: 2, side: 3, m: 1, law: InnovationLaw::Gaussian };
        let g = spec.graph().unwrap();
        let pts = lattice_points(2, 3);
        for (v, p) in g.vertices().iter().zip(&pts) {
            assert_eq!(v.coords(), p.as_slice());
        }
    }

    #[test]
    fn batches_cover_reps() {
        let b: Vec<(u64, u64)> = batches(2 * BATCH + 5).collect();
        assert_eq!(b, vec![(0, BATCH), (1, BATCH), (2, 5)]);
    }
}
