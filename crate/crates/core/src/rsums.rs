//! Joint models, compositional expectations, S-sums, R-sums and the
//! remainder terms `R_{k,ω}`.
//!
//! A [`JointModel`] couples a dependency graph with a source of the random
//! vector `(X_i)`: an exact outcome table, a stored Monte Carlo sample, or a
//! closed-form oracle for mixed absolute moments. Values are divided by
//! `σ = sd(Σ X_i)` once at construction, so every quantity here is computed
//! for the standardised sum; the original `σ` is kept for reports.
//!
//! The remainder
//! `R_{k,ω} = Σ_{η ∈ C*(k+2)} Σ_{chains i₁..i_{k+1}} [η] ▷ (|X_{i₁}|,…,|X_{i_{k+1}}|, (Σ_{N(i_{1:k+1})}|X|)^ω)`
//! is evaluated as the sum of R-sums over the sign sequences `M_{1,k+2}`,
//! which index the same terms. Chain folds are partitioned by the first
//! index `i₁` and combined in a fixed order, so results do not depend on how
//! partitions are scheduled.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combinat::{sign_sequences, Composition, SignSequence};
use crate::cumulants::{cumulants_from_moments, MomentSeq};
use crate::depgraph::DependencyGraph;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Closed-form mixed absolute moments `E ∏ |X_i|` of the raw variables.
pub trait MixedAbsMomentOracle: Send + Sync {
    /// Standard deviation of `Σ X_i`.
    fn sigma(&self) -> f64;
    /// `E ∏_{i ∈ idx} |X_i|` (indices may repeat).
    fn mixed_abs_moment(&self, idx: &[usize]) -> f64;
}

/// Independent coordinates with known absolute moments: `E ∏|X_i|`
/// factorises over distinct indices.
#[derive(Clone, Debug, PartialEq)]
pub struct IndependentAbsMoments {
    /// `abs_moments[i][r−1] = E|X_i|^r`.
    pub abs_moments: Vec<Vec<f64>>,
    /// `Var X_i`.
    pub variances: Vec<f64>,
}

impl MixedAbsMomentOracle for IndependentAbsMoments {
    fn sigma(&self) -> f64 {
        libm::sqrt(self.variances.iter().sum())
    }

    fn mixed_abs_moment(&self, idx: &[usize]) -> f64 {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let mut prod = 1.0;
        let mut s = 0;
        while s < sorted.len() {
            let mut e = s;
            while e < sorted.len() && sorted[e] == sorted[s] {
                e += 1;
            }
            prod *= self.abs_moments[sorted[s]][e - s - 1];
            s = e;
        }
        prod
    }
}

/// An estimate with its Monte Carlo standard error (`None` when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Point value.
    pub value: f64,
    /// Standard error, or `None` for exactly evaluated quantities.
    pub std_error: Option<f64>,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate { value, std_error: None }
    }
}

/// How the model represents the law of `(X_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    /// Exact finite outcome table.
    Exact,
    /// Stored i.i.d. replicates (Monte Carlo).
    Sampled,
    /// Closed-form mixed absolute moments only.
    Oracle,
}

/// A source of the random vector `(X_i)_{i∈I}` together with its dependency
/// graph. See the module documentation.
pub struct JointModel {
    graph: DependencyGraph,
    kind: BackendKind,
    /// Outcome weights (probabilities, or `1/R` for replicates).
    weights: Vec<f64>,
    /// Standardised values, vertex-major: `values[i * outcomes + o]`.
    values: Vec<f64>,
    abs_values: Vec<f64>,
    outcomes: usize,
    sigma: f64,
    sigma_estimated: bool,
    oracle: Option<Box<dyn MixedAbsMomentOracle>>,
}

impl core::fmt::Debug for JointModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("JointModel")
            .field("vertices", &self.graph.len())
            .field("kind", &self.kind)
            .field("outcomes", &self.outcomes)
            .field("sigma", &self.sigma)
            .finish()
    }
}

/// Tolerance for the mean-zero and probability checks of exact models.
pub const EXACT_TOL: f64 = 1e-9;

impl JointModel {
    /// An exact model from `(probability, values)` outcomes, with `values`
    /// indexed by vertex position.
    ///
    /// Probabilities must be positive and sum to one, every `X_i` must have
    /// mean zero, and `Var Σ X_i` must be positive.
    pub fn exact(graph: DependencyGraph, outcomes: &[(f64, Vec<f64>)]) -> Result<Self> {
        let n = graph.len();
        if n == 0 {
            return Err(Error::EmptyIndexSet);
        }
        if outcomes.is_empty() {
            return Err(Error::InvalidModel("no outcomes".into()));
        }
        let mut total = 0.0;
        for (o, (p, vals)) in outcomes.iter().enumerate() {
            if !(*p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidModel(format!("outcome {o} has non-positive probability {p}")));
            }
            if vals.len() != n {
                return Err(Error::InvalidModel(format!(
                    "outcome {o} has {} values for {n} vertices",
                    vals.len()
                )));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("outcome {o} has a non-finite value")));
            }
            total += p;
        }
        if libm::fabs(total - 1.0) > EXACT_TOL {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        let weights: Vec<f64> = outcomes.iter().map(|(p, _)| *p).collect();
        let nout = outcomes.len();
        let mut raw = vec![0.0; n * nout];
        for (o, (_, vals)) in outcomes.iter().enumerate() {
            for (i, v) in vals.iter().enumerate() {
                raw[i * nout + o] = *v;
            }
        }
        for i in 0..n {
            let col = &raw[i * nout..(i + 1) * nout];
            let mean: f64 = col.iter().zip(&weights).map(|(v, w)| v * w).sum();
            let scale = col.iter().fold(1.0f64, |a, v| a.max(libm::fabs(*v)));
            if libm::fabs(mean) > EXACT_TOL * scale {
                return Err(Error::InvalidModel(format!(
                    "vertex {} has mean {mean}, expected 0",
                    graph.vertices()[i]
                )));
            }
        }
        let var: f64 = (0..nout)
            .map(|o| {
                let s: f64 = (0..n).map(|i| raw[i * nout + o]).sum();
                weights[o] * s * s
            })
            .sum();
        Self::finish(graph, BackendKind::Exact, weights, raw, nout, var, false)
    }

    /// A Monte Carlo model: `reps` replicates of `sampler`, replicate `r`
    /// drawn from the stream `(seed, r)`.
    pub fn sampled<F>(graph: DependencyGraph, reps: u64, seed: u64, sampler: F) -> Result<Self>
    where
        F: Fn(&mut Stream, &mut [f64]),
    {
        let n = graph.len();
        let mut rows = Vec::with_capacity(reps as usize);
        for r in 0..reps {
            let mut row = vec![0.0; n];
            sample_row(&sampler, seed, r, &mut row);
            rows.push(row);
        }
        Self::from_replicates(graph, &rows)
    }

    /// A Monte Carlo model from precomputed replicate rows (row `r` must be
    /// replicate `r`, e.g. produced by [`sample_row`]).
    ///
    /// `σ` is the sample standard deviation of the row sums (flagged as
    /// estimated). Each vertex mean must be within six standard errors of 0.
    pub fn from_replicates(graph: DependencyGraph, rows: &[Vec<f64>]) -> Result<Self> {
        let n = graph.len();
        if n == 0 {
            return Err(Error::EmptyIndexSet);
        }
        let reps = rows.len();
        if reps < 2 {
            return Err(Error::InvalidArgument("a sampled model needs at least 2 replicates".into()));
        }
        let mut raw = vec![0.0; n * reps];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!("replicate {r} has {} values for {n} vertices", row.len())));
            }
            for (i, v) in row.iter().enumerate() {
                raw[i * reps + r] = *v;
            }
        }
        let rf = reps as f64;
        for i in 0..n {
            let col = &raw[i * reps..(i + 1) * reps];
            let mean = col.iter().sum::<f64>() / rf;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (rf - 1.0);
            if libm::fabs(mean) > 6.0 * libm::sqrt(var / rf) + 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "vertex {} has sample mean {mean}, inconsistent with mean zero",
                    graph.vertices()[i]
                )));
            }
        }
        let sums: Vec<f64> = (0..reps).map(|r| (0..n).map(|i| raw[i * reps + r]).sum()).collect();
        let mean = sums.iter().sum::<f64>() / rf;
        let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (rf - 1.0);
        Self::finish(graph, BackendKind::Sampled, vec![1.0 / rf; reps], raw, reps, var, true)
    }

    /// A model backed only by closed-form mixed absolute moments.
    pub fn oracle(graph: DependencyGraph, oracle: Box<dyn MixedAbsMomentOracle>) -> Result<Self> {
        if graph.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let sigma = oracle.sigma();
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::ZeroVariance);
        }
        Ok(JointModel {
            graph,
            kind: BackendKind::Oracle,
            weights: Vec::new(),
            values: Vec::new(),
            abs_values: Vec::new(),
            outcomes: 0,
            sigma,
            sigma_estimated: false,
            oracle: Some(oracle),
        })
    }

    fn finish(
        graph: DependencyGraph,
        kind: BackendKind,
        weights: Vec<f64>,
        mut values: Vec<f64>,
        outcomes: usize,
        var: f64,
        sigma_estimated: bool,
    ) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::ZeroVariance);
        }
        let sigma = libm::sqrt(var);
        for v in values.iter_mut() {
            *v /= sigma;
        }
        let abs_values = values.iter().map(|v| libm::fabs(*v)).collect();
        Ok(JointModel { graph, kind, weights, values, abs_values, outcomes, sigma, sigma_estimated, oracle: None })
    }

    /// The dependency graph.
    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    /// Backend kind.
    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Number of outcomes (exact) or replicates (sampled).
    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// `σ = sd(Σ X_i)` of the raw variables.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `true` when `σ` was estimated from replicates.
    pub fn sigma_estimated(&self) -> bool {
        self.sigma_estimated
    }

    fn col(&self, i: usize) -> &[f64] {
        &self.values[i * self.outcomes..(i + 1) * self.outcomes]
    }

    fn abs_col(&self, i: usize) -> &[f64] {
        &self.abs_values[i * self.outcomes..(i + 1) * self.outcomes]
    }

    fn expect(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Standardised sum `W` per outcome.
    pub fn w_values(&self) -> Result<Vec<f64>> {
        if self.kind == BackendKind::Oracle {
            return Err(Error::Unsupported("outcome-level values of W"));
        }
        Ok((0..self.outcomes)
            .map(|o| (0..self.graph.len()).map(|i| self.values[i * self.outcomes + o]).sum())
            .collect())
    }

    /// Outcome weights paired with [`JointModel::w_values`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E|X_i|^r` of the raw (unstandardised) variables, per vertex.
    pub fn per_vertex_abs_moments(&self, r: f64) -> Result<Vec<f64>> {
        let scale = libm::pow(self.sigma, r);
        match self.kind {
            BackendKind::Oracle => {
                let k = libm::round(r);
                if libm::fabs(k - r) > 0.0 || k < 1.0 {
                    return Err(Error::Unsupported("non-integer absolute moments from an oracle"));
                }
                let oracle = self.oracle.as_ref().expect("oracle backend");
                Ok((0..self.graph.len()).map(|i| oracle.mixed_abs_moment(&vec![i; k as usize])).collect())
            }
            _ => Ok((0..self.graph.len())
                .map(|i| {
                    let v: f64 = self
                        .abs_col(i)
                        .iter()
                        .zip(&self.weights)
                        .map(|(a, w)| w * libm::pow(*a, r))
                        .sum();
                    v * scale
                })
                .collect()),
        }
    }

    /// `Σ_i E|X_i|^r` of the raw variables.
    pub fn abs_moment_sum(&self, r: f64) -> Result<f64> {
        Ok(self.per_vertex_abs_moments(r)?.iter().sum())
    }

    /// Summary statistics with absolute moment sums at the given orders.
    pub fn summary(&self, orders: &[f64]) -> Result<ModelSummary> {
        let mut moment_sums = Vec::with_capacity(orders.len());
        for &r in orders {
            moment_sums.push(MomentSum { order: r, value: self.abs_moment_sum(r)? });
        }
        Ok(ModelSummary {
            sigma: self.sigma,
            sigma_estimated: self.sigma_estimated,
            second_moment_sum: self.abs_moment_sum(2.0)?,
            moment_sums,
        })
    }
}

/// Draws replicate `r` of a sampled model into `out`.
pub fn sample_row<F: Fn(&mut Stream, &mut [f64])>(sampler: &F, seed: u64, r: u64, out: &mut [f64]) {
    let mut s = rng::stream(seed, &[rng::TAG_MODEL, r]);
    sampler(&mut s, out);
}

/// `Σ_i E|X_i|^order` at one order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSum {
    /// The order `r`.
    pub order: f64,
    /// `Σ_i E|X_i|^r` (raw variables).
    pub value: f64,
}

/// Summary of a model on the raw scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    /// `σ = sd(Σ X_i)`.
    pub sigma: f64,
    /// `true` when `σ` was estimated.
    pub sigma_estimated: bool,
    /// `Σ_i E X_i²`.
    pub second_moment_sum: f64,
    /// Absolute moment sums at the requested orders.
    pub moment_sums: Vec<MomentSum>,
}

impl ModelSummary {
    /// The sum at `order` (matched to `1e-12`).
    pub fn moment_sum(&self, order: f64) -> Option<f64> {
        self.moment_sums.iter().find(|m| libm::fabs(m.order - order) < 1e-12).map(|m| m.value)
    }
}

/// A random quantity entering a compositional expectation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Quantity {
    /// `X_i` (standardised).
    X(usize),
    /// `|X_i|`.
    AbsX(usize),
    /// `(Σ_{i∈set} |X_i|)^ω`.
    AbsSumPow {
        /// Vertex positions.
        set: Vec<usize>,
        /// Exponent `ω ∈ (0,1]`.
        omega: f64,
    },
}

/// The compositional expectation `[η] ▷ (Y₁,…,Y_t)`: the product over the
/// blocks of `η` of the expectation of the product of the block's
/// quantities.
pub fn comp_expectation(model: &JointModel, eta: &Composition, ys: &[Quantity]) -> Result<Estimate> {
    if eta.total() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "composition of {} does not match {} quantities",
            eta.total(),
            ys.len()
        )));
    }
    let n = model.graph.len();
    for y in ys {
        let ok = match y {
            Quantity::X(i) | Quantity::AbsX(i) => *i < n,
            Quantity::AbsSumPow { set, omega } => set.iter().all(|i| *i < n) && *omega > 0.0 && *omega <= 1.0,
        };
        if !ok {
            return Err(Error::InvalidArgument("quantity references an unknown vertex or bad exponent".into()));
        }
    }
    if model.kind == BackendKind::Oracle {
        let oracle = model.oracle.as_ref().expect("oracle backend");
        let mut prod = 1.0;
        for r in eta.block_ranges() {
            let mut idx = Vec::new();
            let mut sum_set: Option<&[usize]> = None;
            for y in &ys[r] {
                match y {
                    Quantity::AbsX(i) => idx.push(*i),
                    Quantity::AbsSumPow { set, omega } if *omega == 1.0 && sum_set.is_none() => {
                        sum_set = Some(set)
                    }
                    _ => return Err(Error::Unsupported("signed or fractional-power quantities from an oracle")),
                }
            }
            let e = match sum_set {
                None => oracle.mixed_abs_moment(&idx) / libm::pow(model.sigma, idx.len() as f64),
                Some(set) => {
                    let mut acc = 0.0;
                    for &k in set {
                        idx.push(k);
                        acc += oracle.mixed_abs_moment(&idx);
                        idx.pop();
                    }
                    acc / libm::pow(model.sigma, (idx.len() + 1) as f64)
                }
            };
            prod *= e;
        }
        return Ok(Estimate::exact(prod));
    }
    let o = model.outcomes;
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for r in eta.block_ranges() {
        let mut v = vec![1.0; o];
        for y in &ys[r] {
            match y {
                Quantity::X(i) => mul_into(&mut v, model.col(*i)),
                Quantity::AbsX(i) => mul_into(&mut v, model.abs_col(*i)),
                Quantity::AbsSumPow { set, omega } => {
                    let t = abs_sum_pow(model, set, *omega);
                    mul_into(&mut v, &t);
                }
            }
        }
        blocks.push(v);
    }
    let mut acc = Accumulator::new(model);
    acc.add_leaf(model, &blocks.iter().map(Vec::as_slice).collect::<Vec<_>>());
    Ok(acc.finish())
}

fn mul_into(v: &mut [f64], x: &[f64]) {
    for (a, b) in v.iter_mut().zip(x) {
        *a *= b;
    }
}

fn abs_sum_pow(model: &JointModel, set: &[usize], omega: f64) -> Vec<f64> {
    let mut t = vec![0.0; model.outcomes];
    for &k in set {
        for (a, b) in t.iter_mut().zip(model.abs_col(k)) {
            *a += b;
        }
    }
    if omega != 1.0 {
        for a in t.iter_mut() {
            *a = libm::pow(*a, omega);
        }
    }
    t
}

/// Running total of products of block expectations, plus jackknife
/// leave-one-out totals for sampled models.
struct Accumulator {
    value: f64,
    jack: Vec<f64>,
    sampled: bool,
}

impl Accumulator {
    fn new(model: &JointModel) -> Self {
        let sampled = model.kind == BackendKind::Sampled;
        Accumulator { value: 0.0, jack: if sampled { vec![0.0; model.outcomes] } else { Vec::new() }, sampled }
    }

    fn add_leaf(&mut self, model: &JointModel, blocks: &[&[f64]]) {
        if !self.sampled {
            self.value += blocks.iter().map(|b| model.expect(b)).product::<f64>();
            return;
        }
        let r = model.outcomes as f64;
        let sums: Vec<f64> = blocks.iter().map(|b| b.iter().sum::<f64>()).collect();
        self.value += sums.iter().map(|s| s / r).product::<f64>();
        for (rep, j) in self.jack.iter_mut().enumerate() {
            let mut prod = 1.0;
            for (b, s) in blocks.iter().zip(&sums) {
                prod *= (s - b[rep]) / (r - 1.0);
            }
            *j += prod;
        }
    }

    fn finish(self) -> Estimate {
        if !self.sampled {
            return Estimate::exact(self.value);
        }
        Estimate { value: self.value, std_error: Some(jackknife_se(&self.jack)) }
    }
}

fn jackknife_se(loo: &[f64]) -> f64 {
    let r = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / r;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt((r - 1.0) / r * ss)
}

/// Index-set and factorisation structure of one S- or R-sum.
#[derive(Clone, Debug, PartialEq)]
struct SumSpec {
    /// Order `|t_j|` of the index set of each summed position (`0` for the
    /// first position, which ranges over all vertices).
    orders: Vec<usize>,
    /// Whether each summed position opens a new expectation factor.
    starts: Vec<bool>,
    /// R-sum tail: index-set order, exponent and whether it forms its own
    /// factor.
    tail: Option<(usize, f64, bool)>,
    abs: bool,
    /// Some `t_j = 0` with `j ≥ 2`: the sum is empty.
    empty: bool,
}

impl SumSpec {
    fn s_sum(t: &SignSequence) -> Self {
        let v = t.values();
        SumSpec {
            orders: v.iter().map(|x| x.unsigned_abs() as usize).collect(),
            starts: v.iter().enumerate().map(|(j, &x)| j == 0 || x > 0).collect(),
            tail: None,
            abs: false,
            empty: t.has_empty_range(),
        }
    }

    fn r_sum(t: &SignSequence, omega: f64) -> Self {
        let v = t.values();
        let k = v.len();
        SumSpec {
            orders: v[..k - 1].iter().map(|x| x.unsigned_abs() as usize).collect(),
            starts: v[..k - 1].iter().enumerate().map(|(j, &x)| j == 0 || x > 0).collect(),
            tail: Some((v[k - 1].unsigned_abs() as usize, omega, v[k - 1] > 0)),
            abs: true,
            empty: t.has_empty_range(),
        }
    }
}

/// Partial fold of a chain sum over the chains starting at one `i₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSum {
    value: f64,
    jack: Vec<f64>,
    visits: u64,
}

/// A chain sum (remainder, S-sum or R-sum) prepared for partitioned
/// evaluation: one partition per first index `i₁`.
pub struct ChainSumPlan<'m> {
    model: &'m JointModel,
    specs: Vec<SumSpec>,
    budget: u64,
}

impl<'m> ChainSumPlan<'m> {
    /// Number of partitions (the number of vertices).
    pub fn partitions(&self) -> usize {
        self.model.graph.len()
    }

    /// Evaluates the chains with first index `i1`.
    pub fn eval_partition(&self, i1: usize) -> Result<PartialSum> {
        let mut total = PartialSum { value: 0.0, jack: Vec::new(), visits: 0 };
        for spec in &self.specs {
            if spec.empty {
                continue;
            }
            let p = if self.model.kind == BackendKind::Oracle {
                oracle_fold(self.model, spec, i1, self.budget)?
            } else {
                table_fold(self.model, spec, i1, self.budget)?
            };
            total.value += p.value;
            if total.jack.is_empty() {
                total.jack = p.jack;
            } else {
                for (a, b) in total.jack.iter_mut().zip(&p.jack) {
                    *a += b;
                }
            }
            total.visits += p.visits;
            if total.visits > self.budget {
                return Err(Error::BudgetExceeded { budget: self.budget });
            }
        }
        Ok(total)
    }

    /// Combines partition results in the order given (callers pass them in
    /// `i₁` order for reproducibility).
    pub fn combine<I: IntoIterator<Item = PartialSum>>(&self, parts: I) -> Result<Estimate> {
        let mut value = 0.0;
        let mut jack: Vec<f64> = Vec::new();
        let mut visits = 0u64;
        for p in parts {
            value += p.value;
            visits = visits.saturating_add(p.visits);
            if jack.is_empty() {
                jack = p.jack;
            } else {
                for (a, b) in jack.iter_mut().zip(&p.jack) {
                    *a += b;
                }
            }
        }
        if visits > self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        if self.model.kind == BackendKind::Sampled {
            if jack.is_empty() {
                jack = vec![0.0; self.model.outcomes];
            }
            return Ok(Estimate { value, std_error: Some(jackknife_se(&jack)) });
        }
        Ok(Estimate::exact(value))
    }

    /// Sequential evaluation of every partition.
    pub fn evaluate(&self) -> Result<Estimate> {
        let parts: Result<Vec<PartialSum>> = (0..self.partitions()).map(|i| self.eval_partition(i)).collect();
        self.combine(parts?)
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidArgument(format!("ω = {omega} must lie in (0,1]")));
    }
    Ok(())
}

/// Plan for `R_{k,ω}` (sum of R-sums over `M_{1,k+2}`).
pub fn remainder_plan(model: &JointModel, k: usize, omega: f64, budget: u64) -> Result<ChainSumPlan<'_>> {
    check_omega(omega)?;
    let specs = sign_sequences(k)?.iter().map(|t| SumSpec::r_sum(t, omega)).collect();
    Ok(ChainSumPlan { model, specs, budget })
}

/// `R_{k,ω}` of the standardised model.
pub fn remainder(model: &JointModel, k: usize, omega: f64, budget: u64) -> Result<Estimate> {
    remainder_plan(model, k, omega, budget)?.evaluate()
}

/// Plan for the S-sum `S[t]`.
pub fn s_sum_plan<'m>(model: &'m JointModel, t: &SignSequence, budget: u64) -> Result<ChainSumPlan<'m>> {
    if model.kind == BackendKind::Oracle {
        return Err(Error::Unsupported("signed S-sums from an absolute-moment oracle"));
    }
    Ok(ChainSumPlan { model, specs: vec![SumSpec::s_sum(t)], budget })
}

/// The signed S-sum `S[t₁,…,t_K]`.
pub fn s_sum(model: &JointModel, t: &SignSequence, budget: u64) -> Result<Estimate> {
    s_sum_plan(model, t, budget)?.evaluate()
}

/// Plan for the R-sum `R_ω[t]`.
pub fn r_sum_plan<'m>(model: &'m JointModel, t: &SignSequence, omega: f64, budget: u64) -> Result<ChainSumPlan<'m>> {
    check_omega(omega)?;
    if t.len() < 2 {
        return Err(Error::InvalidArgument("R-sums need a sign sequence of length ≥ 2".into()));
    }
    Ok(ChainSumPlan { model, specs: vec![SumSpec::r_sum(t, omega)], budget })
}

/// The R-sum `R_ω[t₁,…,t_K]`.
pub fn r_sum(model: &JointModel, t: &SignSequence, omega: f64, budget: u64) -> Result<Estimate> {
    r_sum_plan(model, t, omega, budget)?.evaluate()
}

struct TableFold<'a> {
    model: &'a JointModel,
    spec: &'a SumSpec,
    budget: u64,
    visits: u64,
    chain: Vec<usize>,
    prefix: Vec<Vec<usize>>,
    /// `cur[j]`: product vector of the open factor after position `j`.
    cur: Vec<Vec<f64>>,
    acc: Accumulator,
}

fn table_fold(model: &JointModel, spec: &SumSpec, i1: usize, budget: u64) -> Result<PartialSum> {
    let depth = spec.orders.len();
    let mut f = TableFold {
        model,
        spec,
        budget,
        visits: 0,
        chain: Vec::with_capacity(depth),
        prefix: Vec::with_capacity(depth),
        cur: vec![vec![0.0; model.outcomes]; depth],
        acc: Accumulator::new(model),
    };
    f.visit(i1)?;
    Ok(PartialSum { value: f.acc.value, jack: f.acc.jack, visits: f.visits })
}

impl TableFold<'_> {
    fn visit(&mut self, v: usize) -> Result<()> {
        self.visits += 1;
        if self.visits > self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        let j = self.chain.len();
        let nb = match self.prefix.last() {
            Some(prev) => self.model.graph.extend_neighborhood(prev, v),
            None => self.model.graph.extend_neighborhood(&[], v),
        };
        self.chain.push(v);
        self.prefix.push(nb);
        let y = if self.spec.abs { self.model.abs_col(v) } else { self.model.col(v) };
        let (before, after) = self.cur.split_at_mut(j);
        let slot = &mut after[0];
        if self.spec.starts[j] {
            slot.copy_from_slice(y);
        } else {
            for ((s, p), x) in slot.iter_mut().zip(&before[j - 1]).zip(y) {
                *s = p * x;
            }
        }
        if j + 1 == self.spec.orders.len() {
            self.leaf();
        } else {
            let order = self.spec.orders[j + 1];
            let cands = self.prefix[order - 1].clone();
            for c in cands {
                self.visit(c)?;
            }
        }
        self.chain.pop();
        self.prefix.pop();
        Ok(())
    }

    fn leaf(&mut self) {
        let last = self.spec.orders.len() - 1;
        // Closed factors end right before each later block start.
        let mut blocks: Vec<&[f64]> = Vec::with_capacity(last + 2);
        for j in 1..=last {
            if self.spec.starts[j] {
                blocks.push(&self.cur[j - 1]);
            }
        }
        match self.spec.tail {
            None => {
                blocks.push(&self.cur[last]);
                self.acc.add_leaf(self.model, &blocks);
            }
            Some((order, omega, own)) => {
                let tail = abs_sum_pow(self.model, &self.prefix[order - 1], omega);
                if own {
                    blocks.push(&self.cur[last]);
                    blocks.push(&tail);
                    self.acc.add_leaf(self.model, &blocks);
                } else {
                    let mut merged = tail;
                    mul_into(&mut merged, &self.cur[last]);
                    blocks.push(&merged);
                    self.acc.add_leaf(self.model, &blocks);
                }
            }
        }
    }
}

fn oracle_fold(model: &JointModel, spec: &SumSpec, i1: usize, budget: u64) -> Result<PartialSum> {
    let (order, omega, own) = spec.tail.ok_or(Error::Unsupported("signed S-sums from an oracle"))?;
    if omega != 1.0 {
        return Err(Error::Unsupported("fractional exponents ω < 1 from an absolute-moment oracle"));
    }
    let oracle = model.oracle.as_ref().expect("oracle backend");
    let sigma = model.sigma;
    let mut visits = 0u64;
    let mut value = 0.0;
    let mut chain = Vec::new();
    let mut prefix: Vec<Vec<usize>> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        model: &JointModel,
        oracle: &dyn MixedAbsMomentOracle,
        spec: &SumSpec,
        tail: (usize, bool),
        sigma: f64,
        v: usize,
        chain: &mut Vec<usize>,
        prefix: &mut Vec<Vec<usize>>,
        visits: &mut u64,
        budget: u64,
        value: &mut f64,
    ) -> Result<()> {
        *visits += 1;
        if *visits > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        let nb = match prefix.last() {
            Some(prev) => model.graph.extend_neighborhood(prev, v),
            None => model.graph.extend_neighborhood(&[], v),
        };
        chain.push(v);
        prefix.push(nb);
        let j = chain.len() - 1;
        if j + 1 == spec.orders.len() {
            let mut prod = 1.0;
            let mut start = 0;
            for b in 1..=j {
                if spec.starts[b] {
                    prod *= oracle.mixed_abs_moment(&chain[start..b]) / libm::pow(sigma, (b - start) as f64);
                    start = b;
                }
            }
            let open = &chain[start..];
            let set = &prefix[tail.0 - 1];
            let last = if tail.1 {
                let closed = oracle.mixed_abs_moment(open) / libm::pow(sigma, open.len() as f64);
                let t: f64 = set.iter().map(|&k| oracle.mixed_abs_moment(&[k])).sum::<f64>() / sigma;
                closed * t
            } else {
                let mut idx = open.to_vec();
                let mut acc = 0.0;
                for &k in set {
                    idx.push(k);
                    acc += oracle.mixed_abs_moment(&idx);
                    idx.pop();
                }
                acc / libm::pow(sigma, (open.len() + 1) as f64)
            };
            *value += prod * last;
        } else {
            let cands = prefix[spec.orders[j + 1] - 1].clone();
            for c in cands {
                rec(model, oracle, spec, tail, sigma, c, chain, prefix, visits, budget, value)?;
            }
        }
        chain.pop();
        prefix.pop();
        Ok(())
    }
    rec(
        model,
        oracle.as_ref(),
        spec,
        (order, own),
        sigma,
        i1,
        &mut chain,
        &mut prefix,
        &mut visits,
        budget,
        &mut value,
    )?;
    Ok(PartialSum { value, jack: Vec::new(), visits })
}

/// One entry of a [`RemainderTable`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderEntry {
    /// Order `j`.
    pub j: usize,
    /// Exponent `ω`.
    pub omega: f64,
    /// `R_{j,ω}`.
    pub value: f64,
    /// Monte Carlo standard error (`None` when exact).
    pub std_error: Option<f64>,
}

/// The remainder terms needed by the Wasserstein-p bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderTable {
    /// The order `p`.
    pub p: f64,
    /// Entries `(j, 1)` for `j ≤ ⌈p⌉−1` then `(j, ω)` for `j ≤ ⌈p⌉`, without
    /// duplicates.
    pub entries: Vec<RemainderEntry>,
}

impl RemainderTable {
    /// Looks up `R_{j,ω}`.
    pub fn get(&self, j: usize, omega: f64) -> Option<&RemainderEntry> {
        self.entries.iter().find(|e| e.j == j && libm::fabs(e.omega - omega) < 1e-12)
    }
}

/// `(j, ω)` pairs required for order `p`: `(j, 1)` for `j ≤ ⌈p⌉−1` and
/// `(j, p+1−⌈p⌉)` for `j ≤ ⌈p⌉`, duplicates removed.
pub fn required_entries(p: f64) -> Result<Vec<(usize, f64)>> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p = {p} must be at least 1")));
    }
    let k = libm::ceil(p) as usize;
    let omega = p + 1.0 - k as f64;
    let mut out: Vec<(usize, f64)> = (1..k).map(|j| (j, 1.0)).collect();
    for j in 1..=k {
        if !out.iter().any(|(a, w)| *a == j && libm::fabs(w - omega) < 1e-12) {
            out.push((j, omega));
        }
    }
    Ok(out)
}

/// Evaluates every entry of [`required_entries`].
pub fn remainder_table(model: &JointModel, p: f64, budget: u64) -> Result<RemainderTable> {
    let mut entries = Vec::new();
    for (j, omega) in required_entries(p)? {
        let e = remainder(model, j, omega, budget)?;
        entries.push(RemainderEntry { j, omega, value: e.value, std_error: e.std_error });
    }
    Ok(RemainderTable { p, entries })
}

fn exact_w_moments(model: &JointModel, order: usize) -> Result<Vec<f64>> {
    if model.kind != BackendKind::Exact {
        return Err(Error::Unsupported("exact expansions without an exact outcome table"));
    }
    let w = model.w_values()?;
    let mut mu = vec![0.0; order + 1];
    for (wv, p) in w.iter().zip(&model.weights) {
        let mut pw = *p;
        for m in mu.iter_mut() {
            *m += pw;
            pw *= wv;
        }
    }
    mu[0] = 1.0;
    Ok(mu)
}

/// Highest polynomial degree accepted by [`verify_wf_expansion`].
pub const MAX_EXPANSION_DEGREE: usize = 16;

/// Residual `E[W f(W)] − Σ_{j=1}^{d} κ_{j+1}(W)/j! · E[f^{(j)}(W)]` for
/// `f(x) = x^d`, by enumeration over the exact outcome table. For a
/// polynomial of degree `d` the expansion is exact, so the residual is zero
/// up to rounding.
pub fn verify_wf_expansion(model: &JointModel, degree: usize) -> Result<f64> {
    if degree == 0 || degree > MAX_EXPANSION_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "degree must lie in 1..={MAX_EXPANSION_DEGREE}, got {degree}"
        )));
    }
    let mu = exact_w_moments(model, degree + 1)?;
    let kappa = cumulants_from_moments(&MomentSeq(mu.clone()))?;
    let lhs = mu[degree + 1];
    let mut rhs = 0.0;
    let mut falling = 1.0; // d!/(d−j)!
    let mut fact = 1.0; // j!
    for j in 1..=degree {
        falling *= (degree + 1 - j) as f64;
        fact *= j as f64;
        rhs += kappa.get(j + 1) / fact * falling * mu[degree - j];
    }
    Ok(lhs - rhs)
}

/// Outcome of [`cumulant_bound_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantBound {
    /// `|κ_{k+2}(W)|`.
    pub lhs: f64,
    /// `4^k R_{k,1}`.
    pub rhs: f64,
    /// `lhs ≤ rhs`.
    pub pass: bool,
}

/// Checks `|κ_{k+2}(W)| ≤ 4^k R_{k,1}` on an exact model.
pub fn cumulant_bound_check(model: &JointModel, k: usize, budget: u64) -> Result<CumulantBound> {
    let mu = exact_w_moments(model, k + 2)?;
    let kappa = cumulants_from_moments(&MomentSeq(mu))?;
    let lhs = libm::fabs(*kappa.get(k + 2));
    let r = remainder(model, k, 1.0, budget)?.value;
    let rhs = libm::pow(4.0, k as f64) * r;
    Ok(CumulantBound { lhs, rhs, pass: lhs <= rhs })
}

/// Largest number of vertices of a [`battery_model`].
pub const BATTERY_MAX_VERTICES: usize = 5;
/// Largest number of joint outcomes of a [`battery_model`].
pub const BATTERY_MAX_OUTCOMES: usize = 8;

/// A random exact model with genuine local dependence, drawn from the
/// stream `(seed, TAG_BATTERY, index)`.
///
/// Between 1 and [`BATTERY_MAX_VERTICES`] vertices are split into
/// independent groups. Each group has its own discrete joint law (random
/// probabilities and values, centred per vertex), the joint law is the
/// product, and the total number of outcomes is at most
/// [`BATTERY_MAX_OUTCOMES`]. The graph is complete inside each group plus
/// random extra edges between groups, so it is a valid dependency graph
/// that is not always the minimal one.
pub fn battery_model(seed: u64, index: u64) -> Result<JointModel> {
    use rand::Rng;
    let mut s = rng::stream(seed, &[rng::TAG_BATTERY, index]);
    let n = s.random_range(1..=BATTERY_MAX_VERTICES);
    let max_groups = n.min(3);
    let want = s.random_range(1..=max_groups);
    let raw: Vec<usize> = (0..n).map(|_| s.random_range(0..want)).collect();
    // Relabel to consecutive non-empty groups.
    let mut labels: Vec<usize> = raw.clone();
    labels.sort_unstable();
    labels.dedup();
    let group: Vec<usize> = raw.iter().map(|g| labels.binary_search(g).expect("label present")).collect();
    let groups = labels.len();

    // Outcomes per group with product ≤ BATTERY_MAX_OUTCOMES.
    let mut remaining = BATTERY_MAX_OUTCOMES;
    let mut sizes = Vec::with_capacity(groups);
    for g in 0..groups {
        let reserve = 1usize << (groups - g - 1);
        let max_here = (remaining / reserve).max(2);
        let o = s.random_range(2..=max_here);
        sizes.push(o);
        remaining /= o;
    }

    // Per-group laws: probabilities and centred values.
    let mut laws: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::with_capacity(groups);
    for (g, &o) in sizes.iter().enumerate() {
        let w: Vec<f64> = (0..o).map(|_| 0.1 + s.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut values = vec![vec![0.0; n]; o];
        for v in (0..n).filter(|&v| group[v] == g) {
            let col: Vec<f64> = (0..o).map(|_| 4.0 * s.random::<f64>() - 2.0).collect();
            let mean: f64 = col.iter().zip(&probs).map(|(x, p)| x * p).sum();
            for (row, x) in values.iter_mut().zip(&col) {
                row[v] = x - mean;
            }
        }
        laws.push((probs, values));
    }

    // Product law over the groups (mixed radix).
    let total: usize = sizes.iter().product();
    let mut outcomes = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut p = 1.0;
        let mut row = vec![0.0; n];
        for (g, &o) in sizes.iter().enumerate() {
            let idx = code % o;
            code /= o;
            p *= laws[g].0[idx];
            for v in (0..n).filter(|&v| group[v] == g) {
                row[v] = laws[g].1[idx][v];
            }
        }
        outcomes.push((p, row));
    }

    let ids: Vec<crate::depgraph::VertexId> = (0..n as i64).map(crate::depgraph::VertexId::int).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if group[a] == group[b] || s.random::<f64>() < 0.2 {
                edges.push((ids[a].clone(), ids[b].clone()));
            }
        }
    }
    let graph = DependencyGraph::from_edge_list(&edges, Some(&ids))?;
    JointModel::exact(graph, &outcomes)
}
