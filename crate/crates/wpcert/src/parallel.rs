//! Worker-count-invariant parallel drivers.
//!
//! Work is split into partitions whose results are collected in partition
//! order and combined sequentially, so every function here returns exactly
//! what its sequential counterpart in `wpcert-core` returns.

use rayon::prelude::*;
use wpcert_core::depgraph::DependencyGraph;
use wpcert_core::rng;
use wpcert_core::rsums::{self, JointModel, RemainderEntry, RemainderTable};
use wpcert_core::sim::{points_from_sample, RatePoint};
use wpcert_core::sim::{self, GeneratorSpec};

use crate::CliError;

/// A fixed-size thread pool.
pub struct Workers {
    pool: rayon::ThreadPool,
    count: usize,
}

impl Workers {
    /// A pool with `count ≥ 1` threads.
    pub fn new(count: usize) -> Result<Self, CliError> {
        if count == 0 {
            return Err(CliError::Input("--workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build()
            .map_err(|e| CliError::Output(format!("cannot start worker pool: {e}")))?;
        Ok(Workers { pool, count })
    }

    /// Number of threads.
    pub fn count(&self) -> usize {
        self.count
    }

    /// `(0..n).map(f)` evaluated on the pool, results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// [`rsums::remainder_table`] with the `i₁` partitions of every entry
/// evaluated in parallel.
pub fn remainder_table(
    model: &JointModel,
    p: f64,
    budget: u64,
    workers: &Workers,
) -> Result<RemainderTable, CliError> {
    let mut entries = Vec::new();
    for (j, omega) in rsums::required_entries(p)? {
        let plan = rsums::remainder_plan(model, j, omega, budget)?;
        let parts = workers.map(plan.partitions(), |i| plan.eval_partition(i));
        let e = plan.combine(parts.into_iter().collect::<Result<Vec<_>, _>>()?)?;
        entries.push(RemainderEntry { j, omega, value: e.value, std_error: e.std_error });
    }
    Ok(RemainderTable { p, entries })
}

/// A sampled joint model of a generator's summands: replicate `r` comes from
/// the stream `(seed, TAG_MODEL, r)`.
pub fn sampled_model(spec: &GeneratorSpec, reps: u64, seed: u64, workers: &Workers) -> Result<JointModel, CliError> {
    let graph: DependencyGraph = spec.graph()?;
    let n = graph.len();
    let sampler = |s: &mut rng::Stream, out: &mut [f64]| {
        let field = spec.sample_field(s).expect("generator validated above");
        out.copy_from_slice(&field);
    };
    let rows = workers.map(reps as usize, |r| {
        let mut row = vec![0.0; n];
        rsums::sample_row(&sampler, seed, r as u64, &mut row);
        row
    });
    Ok(JointModel::from_replicates(graph, &rows)?)
}

/// Standardised sums `W` in generation order (same values as
/// [`sim::sample_w`], before sorting).
pub fn sample_w(spec: &GeneratorSpec, reps: u64, seed: u64, workers: &Workers) -> Result<Vec<f64>, CliError> {
    if reps == 0 {
        return Err(CliError::Input("reps must be at least 1".into()));
    }
    spec.sigma()?;
    let batches: Vec<(u64, u64)> = sim::batches(reps).collect();
    let parts = workers.map(batches.len(), |b| sim::sample_w_batch(spec, seed, batches[b].0, batches[b].1));
    let mut all = Vec::with_capacity(reps as usize);
    for part in parts {
        all.extend(part?);
    }
    Ok(all)
}

/// Parallel [`wpcert_core::sim::stats::rate_points`].
pub fn rate_points(
    spec: &GeneratorSpec,
    sizes: &[usize],
    ps: &[f64],
    reps: u64,
    seed: u64,
    workers: &Workers,
) -> Result<Vec<RatePoint>, CliError> {
    let mut out = Vec::new();
    for &size in sizes {
        let sized = spec.with_size(size);
        let sample = sample_w(&sized, reps, rng::derive(seed, &[size as u64]), workers)?;
        out.extend(points_from_sample(&sized, size, sample, ps, reps, seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wpcert_core::sim::InnovationLaw;
    use wpcert_core::sim as stats;

    #[test]
    fn matches_sequential_core() {
        let spec = GeneratorSpec::MdepMa { d: 1, side: 6, m: 1, law: InnovationLaw::Uniform };
        let w1 = Workers::new(1).unwrap();
        let w3 = Workers::new(3).unwrap();
        let model = sampled_model(&spec, 300, 5, &w3).unwrap();
        let seq = rsums::remainder_table(&model, 1.5, 1 << 24).unwrap();
        assert_eq!(remainder_table(&model, 1.5, 1 << 24, &w1).unwrap(), seq);
        assert_eq!(remainder_table(&model, 1.5, 1 << 24, &w3).unwrap(), seq);

        let sizes = [4, 8, 16];
        let seq = stats::rate_points(&spec, &sizes, &[1.0, 2.0], 9000, 11).unwrap();
        assert_eq!(rate_points(&spec, &sizes, &[1.0, 2.0], 9000, 11, &w3).unwrap(), seq);
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(Workers::new(0).is_err());
    }
}
