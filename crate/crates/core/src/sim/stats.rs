//! Empirical distributions, Wasserstein distances by quantile coupling,
//! rate fits and tail probabilities.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{batches, sample_w_batch, GeneratorSpec};
use crate::normal;
use crate::rng;
use crate::{Error, Result};

/// A sorted sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    /// Sorts the sample (NaNs last).
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_unstable_by(f64::total_cmp);
        EmpiricalDist { sorted: sample }
    }

    /// The sorted values.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Sample size.
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    /// `true` for an empty sample.
    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of the sample `≥ t`.
    pub fn exceedance(&self, t: f64) -> f64 {
        let below = self.sorted.partition_point(|v| *v < t);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }
}

/// `((1/N) Σ |X_(i) − Φ⁻¹((i − ½)/N)|^p)^{1/p}`.
pub fn wasserstein_to_normal(d: &EmpiricalDist, p: f64) -> Result<f64> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 sample points".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be ≥ 1")));
    }
    let nf = n as f64;
    let mut acc = 0.0;
    for (i, x) in d.sorted.iter().enumerate() {
        let z = normal::quantile((i as f64 + 0.5) / nf);
        acc += libm::pow(libm::fabs(x - z), p);
    }
    Ok(libm::pow(acc / nf, 1.0 / p))
}

/// `W_p` between two empirical laws: `(∫₀¹ |F⁻¹(u) − G⁻¹(u)|^p du)^{1/p}`
/// over the merged quantile breakpoints (any sample sizes).
pub fn wasserstein_two_sample(a: &EmpiricalDist, b: &EmpiricalDist, p: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be ≥ 1")));
    }
    let (na, nb) = (a.len() as u128, b.len() as u128);
    // Walk the common refinement of {i/na} and {j/nb} in units of 1/(na·nb).
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0u128;
    let total = na * nb;
    let mut acc = 0.0;
    while u < total {
        let next_a = (i as u128 + 1) * nb;
        let next_b = (j as u128 + 1) * na;
        let next = next_a.min(next_b);
        let w = (next - u) as f64 / total as f64;
        acc += w * libm::pow(libm::fabs(a.sorted[i] - b.sorted[j]), p);
        u = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    Ok(libm::pow(acc, 1.0 / p))
}

/// Number of sub-sample groups used for standard errors of distances.
pub const RATE_GROUPS: usize = 10;

/// One distance measurement of a rate experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Size parameter passed to [`GeneratorSpec::with_size`].
    pub size: usize,
    /// Abscissa of the fit (see [`GeneratorSpec::rate_scale`]).
    pub scale: usize,
    /// Wasserstein order.
    pub p: f64,
    /// `W_p` estimate from all replicates.
    pub distance: f64,
    /// Spread of the estimates on [`RATE_GROUPS`] disjoint sub-samples,
    /// divided by `√groups`.
    pub std_error: f64,
    /// Replicates.
    pub reps: u64,
    /// Master seed.
    pub seed: u64,
}

/// Least-squares fit of `log distance` against `log scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Abscissae per point.
    pub sizes: Vec<usize>,
    /// Distances per point.
    pub distances: Vec<f64>,
    /// Fitted slope.
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    /// No evidence of convergence: `slope > −¼` or `slope + 2·stderr ≥ 0`.
    pub non_normal: bool,
}

/// Ordinary least squares on `(log scale, log distance)`.
pub fn fit_rate(points: &[RatePoint]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need ≥ 3 points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.distance > 0.0) || !p.distance.is_finite()) {
        return Err(Error::DegenerateFit("distances must be positive and finite".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.scale as f64)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.distance)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| { let r = y - intercept - slope * x; r * r }).sum();
    let slope_stderr = libm::sqrt(rss / (n - 2.0) / sxx);
    Ok(RateFit {
        sizes: points.iter().map(|p| p.scale).collect(),
        distances: points.iter().map(|p| p.distance).collect(),
        slope,
        intercept,
        slope_stderr,
        non_normal: slope > -0.25 || slope + 2.0 * slope_stderr >= 0.0,
    })
}

/// Distance measurements for every size and order. Size `s` draws from the
/// seed `derive(seed, [s])`, and all orders share the same sample.
pub fn rate_points(spec: &GeneratorSpec, sizes: &[usize], ps: &[f64], reps: u64, seed: u64) -> Result<Vec<RatePoint>> {
    let mut out = Vec::new();
    for &size in sizes {
        let sized = spec.with_size(size);
        let size_seed = rng::derive(seed, &[size as u64]);
        let mut all = Vec::with_capacity(reps as usize);
        for (b, count) in batches(reps) {
            all.extend(sample_w_batch(&sized, size_seed, b, count)?);
        }
        out.extend(points_from_sample(&sized, size, all, ps, reps, seed)?);
    }
    Ok(out)
}

/// Distances and group standard errors for one sample (replicates in
/// generation order).
pub fn points_from_sample(
    spec: &GeneratorSpec,
    size: usize,
    sample: Vec<f64>,
    ps: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<RatePoint>> {
    let group_len = sample.len() / RATE_GROUPS;
    let groups: Vec<EmpiricalDist> = if group_len >= 2 {
        (0..RATE_GROUPS)
            .map(|g| EmpiricalDist::new(sample[g * group_len..(g + 1) * group_len].to_vec()))
            .collect()
    } else {
        Vec::new()
    };
    let full = EmpiricalDist::new(sample);
    let mut out = Vec::with_capacity(ps.len());
    for &p in ps {
        let distance = wasserstein_to_normal(&full, p)?;
        let std_error = if groups.is_empty() {
            f64::NAN
        } else {
            let ds: Vec<f64> = groups.iter().map(|g| wasserstein_to_normal(g, p)).collect::<Result<_>>()?;
            let g = ds.len() as f64;
            let mean = ds.iter().sum::<f64>() / g;
            let var = ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (g - 1.0);
            libm::sqrt(var / g)
        };
        out.push(RatePoint { size, scale: spec.rate_scale(size), p, distance, std_error, reps, seed });
    }
    Ok(out)
}

/// Rate experiment for one order `p`: sizes must be increasing, at least 3.
pub fn rate_experiment(spec: &GeneratorSpec, sizes: &[usize], p: f64, reps: u64, seed: u64) -> Result<RateFit> {
    check_sizes(sizes)?;
    fit_rate(&rate_points(spec, sizes, &[p], reps, seed)?)
}

/// Validates a size list for a rate experiment.
pub fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 sizes, got {}", sizes.len())));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::InvalidArgument("sizes must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Empirical exceedance probability at one threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    /// Threshold.
    pub t: f64,
    /// `P̂(W ≥ t)`.
    pub prob: f64,
    /// Binomial standard error `√(P̂(1−P̂)/N)`.
    pub std_error: f64,
    /// Fewer than 10 expected exceedances: the estimate is unreliable.
    pub low_count: bool,
}

/// `P̂(W ≥ t)` on a grid, from one sample of `reps` draws.
pub fn tail_probability(spec: &GeneratorSpec, t_grid: &[f64], reps: u64, seed: u64) -> Result<Vec<TailPoint>> {
    let tail_seed = rng::derive(seed, &[rng::TAG_TAIL]);
    let d = super::sample_w(spec, reps, tail_seed)?;
    Ok(tail_points(&d, t_grid))
}

/// Exceedance probabilities of an existing sample.
pub fn tail_points(d: &EmpiricalDist, t_grid: &[f64]) -> Vec<TailPoint> {
    let n = d.len() as f64;
    t_grid
        .iter()
        .map(|&t| {
            let prob = d.exceedance(t);
            TailPoint {
                t,
                prob,
                std_error: libm::sqrt(prob * (1.0 - prob) / n),
                low_count: prob * n < 10.0,
            }
        })
        .collect()
}
