//! Moment/cumulant algebra: partial Bell polynomials, the two conversion
//! directions, the moment recursion, Hankel determinants and Hamburger
//! feasibility.
//!
//! All conversions are generic over [`Scalar`], implemented for `f64` and
//! for exact rationals ([`Rational`]), so the same code path serves
//! production and exact verification.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{linalg, rng, Error, Result};

/// Exact rational arithmetic.
pub type Rational = BigRational;

/// Field operations needed by the moment/cumulant algebra.
pub trait Scalar:
    Clone
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Exact embedding of an integer.
    fn from_i64(v: i64) -> Self;
    /// Embedding of a double (exact for rationals).
    fn from_f64(v: f64) -> Self;
    /// Nearest double.
    fn to_f64(&self) -> f64;
    /// Absolute value.
    fn abs_val(&self) -> Self;

    /// Type in which the conversions accumulate: a compensated
    /// double-double for `f64`, the type itself for exact scalars.
    type Acc: Scalar;
    /// Lossless embedding into the accumulator.
    fn widen(&self) -> Self::Acc;
    /// Rounding back from the accumulator.
    fn narrow(acc: &Self::Acc) -> Self;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs_val(&self) -> Self {
        libm::fabs(*self)
    }
    type Acc = DoubleDouble;
    fn widen(&self) -> DoubleDouble {
        DoubleDouble::from(*self)
    }
    fn narrow(acc: &DoubleDouble) -> Self {
        acc.to_f64()
    }
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        Rational::from_float(v).unwrap_or_else(Rational::zero)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    type Acc = Rational;
    fn widen(&self) -> Rational {
        self.clone()
    }
    fn narrow(acc: &Rational) -> Self {
        acc.clone()
    }
}

/// An unevaluated sum `hi + lo` of two doubles with `|lo| ≤ ulp(hi)/2`,
/// giving about 106 bits of precision. Used to accumulate the `f64`
/// moment/cumulant conversions so that their only significant error is
/// the final rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    /// The components `(hi, lo)`.
    pub fn parts(&self) -> (f64, f64) {
        (self.hi, self.lo)
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        DoubleDouble { hi: s, lo: b - (s - a) }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            core::cmp::Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = Self::two_sum(self.hi, b.hi);
        let (t, f) = Self::two_sum(self.lo, b.lo);
        let r = Self::quick_two_sum(s, e + t);
        Self::quick_two_sum(r.hi, r.lo + f)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let p = self.hi * b.hi;
        let e = libm::fma(self.hi, b.hi, -p);
        Self::quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * DoubleDouble::from(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * DoubleDouble::from(q2);
        let q3 = r.hi / b.hi;
        Self::quick_two_sum(q1, q2) + DoubleDouble::from(q3)
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        DoubleDouble::default()
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        DoubleDouble::from(1.0)
    }
}

impl Scalar for DoubleDouble {
    fn from_i64(v: i64) -> Self {
        let hi = v as f64;
        DoubleDouble::quick_two_sum(hi, (v - hi as i64) as f64)
    }
    fn from_f64(v: f64) -> Self {
        DoubleDouble::from(v)
    }
    fn to_f64(&self) -> f64 {
        self.hi + self.lo
    }
    fn abs_val(&self) -> Self {
        if self.hi < 0.0 { -*self } else { *self }
    }
    type Acc = DoubleDouble;
    fn widen(&self) -> Self {
        *self
    }
    fn narrow(acc: &Self) -> Self {
        *acc
    }
}

/// Raw moments `(μ₀, μ₁, …, μ_N)`; index `j` holds `μ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSeq<S = f64>(pub Vec<S>);

/// Cumulants `(κ₁, …, κ_N)`; index `j−1` holds `κ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantSeq<S = f64>(pub Vec<S>);

impl<S: Scalar> MomentSeq<S> {
    /// Highest order present.
    pub fn order(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
    /// `μ_j`.
    pub fn get(&self, j: usize) -> &S {
        &self.0[j]
    }
}

impl<S: Scalar> CumulantSeq<S> {
    /// Highest order present.
    pub fn order(&self) -> usize {
        self.0.len()
    }
    /// `κ_j` for `j ≥ 1`.
    pub fn get(&self, j: usize) -> &S {
        &self.0[j - 1]
    }
}

fn binomial<S: Scalar>(n: usize, k: usize) -> S {
    // Multiplicative formula in the scalar type: exact for rationals and
    // correctly rounded enough for the small orders used in f64.
    let mut acc = S::one();
    for i in 0..k {
        acc = acc * S::from_i64((n - i) as i64) / S::from_i64((i + 1) as i64);
    }
    acc
}

fn factorial<S: Scalar>(n: usize) -> S {
    (1..=n).fold(S::one(), |acc, i| acc * S::from_i64(i as i64))
}

/// Partial exponential Bell polynomial `B_{n,j}(x₁,…,x_{n−j+1})` by the
/// explicit multi-index sum over `i₁+…+i_{n−j+1} = j`,
/// `i₁ + 2i₂ + … = n`, with coefficient `n! / ∏ i_m! (m!)^{i_m}`.
///
/// `x[m−1]` holds `x_m`. `B_{0,0} = 1`.
pub fn bell_partial<S: Scalar>(n: usize, j: usize, x: &[S]) -> Result<S> {
    if n == 0 && j == 0 {
        return Ok(S::one());
    }
    if j == 0 || j > n {
        return Err(Error::InvalidArgument(alloc::format!("B_{{{n},{j}}} needs 1 ≤ j ≤ n")));
    }
    let width = n - j + 1;
    if x.len() < width {
        return Err(Error::InsufficientOrder { needed: width, available: x.len() });
    }
    let mut total = S::zero();
    let mut counts = vec![0usize; width];
    bell_rec(n, j, x, 0, n, j, &mut counts, &mut total);
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn bell_rec<S: Scalar>(
    n: usize,
    j: usize,
    x: &[S],
    m: usize,
    weight_left: usize,
    parts_left: usize,
    counts: &mut [usize],
    total: &mut S,
) {
    if m == counts.len() {
        if weight_left == 0 && parts_left == 0 {
            let mut term = factorial::<S>(n);
            for (idx, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let size = idx + 1;
                    let denom = factorial::<S>(c) * pow_s(&factorial::<S>(size), c);
                    term = term / denom * pow_s(&x[idx], c);
                }
            }
            *total = total.clone() + term;
        }
        return;
    }
    let size = m + 1;
    let max_c = (weight_left / size).min(parts_left);
    for c in 0..=max_c {
        counts[m] = c;
        bell_rec(n, j, x, m + 1, weight_left - c * size, parts_left - c, counts, total);
    }
    counts[m] = 0;
}

fn pow_s<S: Scalar>(x: &S, e: usize) -> S {
    (0..e).fold(S::one(), |acc, _| acc * x.clone())
}

/// Table `B[n][j]` for `0 ≤ j ≤ n ≤ order`, via the recurrence
/// `B_{n,j} = Σ_i C(n−1,i−1) x_i B_{n−i,j−1}`.
pub fn bell_table<S: Scalar>(order: usize, x: &[S]) -> Result<Vec<Vec<S>>> {
    if x.len() < order {
        return Err(Error::InsufficientOrder { needed: order, available: x.len() });
    }
    let mut b = vec![vec![S::zero(); order + 1]; order + 1];
    b[0][0] = S::one();
    for n in 1..=order {
        for j in 1..=n {
            let mut acc = S::zero();
            for i in 1..=(n - j + 1) {
                let prev = &b[n - i][j - 1];
                if !prev.is_zero() {
                    acc = acc + binomial::<S>(n - 1, i - 1) * x[i - 1].clone() * prev.clone();
                }
            }
            b[n][j] = acc;
        }
    }
    Ok(b)
}

/// `μ_n = Σ_j B_{n,j}(κ₁,…,κ_{n−j+1})` for `n ≤ order(κ)`, with `μ₀ = 1`.
///
/// Evaluated through the equivalent recursion
/// `μ_n = Σ_{j=1}^{n} C(n−1, j−1) κ_j μ_{n−j}` in [`Scalar::Acc`]
/// (compensated for `f64`, exact for rationals).
pub fn moments_from_cumulants<S: Scalar>(k: &CumulantSeq<S>) -> MomentSeq<S> {
    let order = k.order();
    let kappa: Vec<S::Acc> = k.0.iter().map(S::widen).collect();
    let mut mu: Vec<S::Acc> = Vec::with_capacity(order + 1);
    mu.push(S::Acc::one());
    for n in 1..=order {
        let mut acc = S::Acc::zero();
        let mut binom = S::Acc::one(); // C(n−1, j−1)
        for j in 1..=n {
            acc = acc + binom.clone() * kappa[j - 1].clone() * mu[n - j].clone();
            binom = binom * S::Acc::from_i64((n - j) as i64) / S::Acc::from_i64(j as i64);
        }
        mu.push(acc);
    }
    MomentSeq(mu.iter().map(S::narrow).collect())
}

/// `κ_n = Σ_j (−1)^{j−1}(j−1)! B_{n,j}(μ₁,…,μ_{n−j+1})`.
///
/// Evaluated through the equivalent recursion
/// `κ_n = μ_n − Σ_{j=1}^{n−1} C(n−1, j−1) κ_j μ_{n−j}` in [`Scalar::Acc`],
/// which avoids the cancellation between the factorially weighted Bell
/// terms in floating point and gives identical results in exact arithmetic.
pub fn cumulants_from_moments<S: Scalar>(m: &MomentSeq<S>) -> Result<CumulantSeq<S>> {
    // μ₀ does not enter the recursion; a tolerance admits moments of
    // floating-point atom laws whose weights sum to 1 up to rounding.
    if m.0.first().map(|v| (v.clone() - S::one()).abs_val().to_f64() > 1e-12).unwrap_or(true) {
        return Err(Error::MomentPrecondition("μ₀ must equal 1".into()));
    }
    let order = m.order();
    let mu: Vec<S::Acc> = m.0.iter().map(S::widen).collect();
    let mut kappa: Vec<S::Acc> = Vec::with_capacity(order);
    for n in 1..=order {
        let mut acc = mu[n].clone();
        let mut binom = S::Acc::one(); // C(n−1, j−1)
        for j in 1..n {
            acc = acc - binom.clone() * kappa[j - 1].clone() * mu[n - j].clone();
            binom = binom * S::Acc::from_i64((n - j) as i64) / S::Acc::from_i64(j as i64);
        }
        kappa.push(acc);
    }
    Ok(CumulantSeq(kappa.iter().map(S::narrow).collect()))
}

/// Right-hand side of `μ_n = Σ_{j=1}^{n} C(n−1,j−1) κ_j μ_{n−j}`.
pub fn moment_recursion<S: Scalar>(k: &CumulantSeq<S>, m: &MomentSeq<S>, n: usize) -> Result<S> {
    if n == 0 {
        return Err(Error::InvalidArgument("the recursion starts at n = 1".into()));
    }
    if k.order() < n {
        return Err(Error::InsufficientOrder { needed: n, available: k.order() });
    }
    if m.0.len() < n {
        return Err(Error::InsufficientOrder { needed: n - 1, available: m.order() });
    }
    let mut acc = S::zero();
    for j in 1..=n {
        acc = acc + binomial::<S>(n - 1, j - 1) * k.get(j).clone() * m.0[n - j].clone();
    }
    Ok(acc)
}

/// Determinant of the `(j+1)×(j+1)` Hankel matrix `(μ_{a+b})_{a,b ≤ j}`.
pub fn hankel_det<S: Scalar>(m: &MomentSeq<S>, j: usize) -> Result<S> {
    if m.0.len() < 2 * j + 1 {
        return Err(Error::InsufficientOrder { needed: 2 * j, available: m.order() });
    }
    let n = j + 1;
    let mut a = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            a.push(m.0[r + c].clone());
        }
    }
    Ok(linalg::determinant(a, n))
}

/// Outcome of the Sylvester test on the Hankel determinants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    /// Every determinant `H_j` with `2j ≤ N` is strictly positive.
    Feasible,
    /// Positive up to `order − 1`, then (numerically) zero from `order` on:
    /// a finite-atom law, determinate.
    Boundary {
        /// First `j` with `H_j = 0`.
        order: usize,
    },
    /// Some determinant is negative (or positive after a zero one).
    Infeasible {
        /// First offending `j`.
        order: usize,
    },
}

impl Feasibility {
    /// `true` for [`Feasibility::Feasible`] and [`Feasibility::Boundary`].
    pub fn is_feasible(&self) -> bool {
        !matches!(self, Feasibility::Infeasible { .. })
    }
}

/// Hamburger feasibility of `μ₀..μ_N` via the signs of `H_j`, `2j ≤ N`.
///
/// A determinant counts as zero when `|H_j| ≤ rel_tol · ∏_{a≤j} max(μ_{2a}, 1)`
/// (Hadamard's bound scale). Pass `rel_tol = 0` for exact arithmetic.
pub fn hamburger_feasible_tol<S: Scalar>(m: &MomentSeq<S>, rel_tol: f64) -> Result<Feasibility> {
    if m.0.first().map(|v| *v != S::one()).unwrap_or(true) {
        return Err(Error::MomentPrecondition("μ₀ must equal 1".into()));
    }
    let mut first_zero: Option<usize> = None;
    let mut scale = S::one();
    for j in 0..=(m.order() / 2) {
        let diag = m.0[2 * j].clone();
        if diag > S::one() {
            scale = scale * diag;
        }
        let h = hankel_det(m, j)?;
        let tol = S::from_f64(rel_tol) * scale.clone();
        let is_zero = h.abs_val() <= tol;
        if is_zero {
            first_zero.get_or_insert(j);
        } else if h < S::zero() || first_zero.is_some() {
            return Ok(Feasibility::Infeasible { order: first_zero.unwrap_or(j) });
        }
    }
    Ok(match first_zero {
        Some(order) => Feasibility::Boundary { order },
        None => Feasibility::Feasible,
    })
}

/// [`hamburger_feasible_tol`] with the default `f64` tolerance `1e-10`.
pub fn hamburger_feasible(m: &MomentSeq<f64>) -> Result<Feasibility> {
    hamburger_feasible_tol(m, 1e-10)
}

/// Plug-in raw moments of a scalar sampler with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// `μ̂₀ = 1, μ̂₁, …`.
    pub moments: MomentSeq<f64>,
    /// Jackknife standard error of each `μ̂_j` (zero for `j = 0`).
    pub std_errors: Vec<f64>,
    /// Number of replicates.
    pub reps: u64,
}

/// Replicates drawn per random stream in [`estimate_moments_mc`].
pub const MC_BLOCK: u64 = 4096;

/// Monte Carlo raw moments of `W` through `order`.
///
/// Replicates are grouped in blocks of [`MC_BLOCK`]; block `b` draws from
/// the stream `rng::stream(seed, b)`, so the output depends only on
/// `(sampler, order, reps, seed)`. For a plug-in mean the jackknife standard
/// error equals `s/√reps`, which is what is reported. Cumulants obtained from
/// these moments through [`cumulants_from_moments`] carry an `O(1/reps)`
/// plug-in bias.
pub fn estimate_moments_mc<F>(sampler: F, order: usize, reps: u64, seed: u64) -> Result<MomentEstimate>
where
    F: Fn(&mut rng::Stream) -> f64,
{
    if reps < 2 {
        return Err(Error::InvalidArgument("moment estimation needs reps ≥ 2".into()));
    }
    let blocks = reps.div_ceil(MC_BLOCK);
    let mut acc = MomentAccumulator::new(order);
    for b in 0..blocks {
        let count = MC_BLOCK.min(reps - b * MC_BLOCK);
        acc.merge(&moment_block(&sampler, order, seed, b, count));
    }
    Ok(acc.finish())
}

/// Power sums of one block of replicates (see [`estimate_moments_mc`]).
pub fn moment_block<F>(sampler: &F, order: usize, seed: u64, block: u64, count: u64) -> MomentAccumulator
where
    F: Fn(&mut rng::Stream) -> f64,
{
    let mut stream = rng::stream(seed, &[rng::TAG_MOMENTS, block]);
    let mut acc = MomentAccumulator::new(order);
    for _ in 0..count {
        let w = sampler(&mut stream);
        acc.push(w);
    }
    acc
}

/// Running sums `Σ w^j` and `Σ w^{2j}` for moment estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    sums: Vec<f64>,
    sq_sums: Vec<f64>,
}

impl MomentAccumulator {
    /// Empty accumulator for orders `0..=order`.
    pub fn new(order: usize) -> Self {
        MomentAccumulator { n: 0, sums: vec![0.0; order + 1], sq_sums: vec![0.0; order + 1] }
    }

    /// Adds one replicate.
    pub fn push(&mut self, w: f64) {
        self.n += 1;
        let mut p = 1.0;
        for j in 0..self.sums.len() {
            self.sums[j] += p;
            self.sq_sums[j] += p * p;
            p *= w;
        }
    }

    /// Adds the sums of another block (deterministic when merged in order).
    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.n += other.n;
        for j in 0..self.sums.len() {
            self.sums[j] += other.sums[j];
            self.sq_sums[j] += other.sq_sums[j];
        }
    }

    /// Means and standard errors.
    pub fn finish(&self) -> MomentEstimate {
        let n = self.n as f64;
        let mut mu = Vec::with_capacity(self.sums.len());
        let mut se = Vec::with_capacity(self.sums.len());
        for j in 0..self.sums.len() {
            let mean = if j == 0 { 1.0 } else { self.sums[j] / n };
            mu.push(mean);
            let var = ((self.sq_sums[j] - n * mean * mean) / (n - 1.0)).max(0.0);
            se.push(if j == 0 { 0.0 } else { libm::sqrt(var / n) });
        }
        MomentEstimate { moments: MomentSeq(mu), std_errors: se, reps: self.n }
    }
}

/// Standard normal moments `μ_j` through `order` (`(j−1)!!` for even `j`).
pub fn gaussian_moments<S: Scalar>(order: usize) -> MomentSeq<S> {
    let mut mu = vec![S::one()];
    for j in 1..=order {
        if j % 2 == 1 {
            mu.push(S::zero());
        } else {
            let prev = mu[j - 2].clone();
            mu.push(prev * S::from_i64((j - 1) as i64));
        }
    }
    MomentSeq(mu)
}
