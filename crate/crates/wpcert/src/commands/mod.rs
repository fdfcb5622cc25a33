//! The subcommands. Each takes a parsed configuration and a [`Context`] and
//! returns a [`CommandOutput`] holding a JSON document, a table, and any
//! extra data files.

pub mod bound;
pub mod matching;
pub mod selftest;
pub mod simulate;
pub mod stein;
pub mod tail;

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::formats::{self, Table};
use crate::models::MODEL_KEYS;
use crate::parallel::Workers;
use crate::{CliError, Format, RunConfig};

/// Seed used when neither the configuration nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 0;

/// Shared run settings.
pub struct Context {
    /// Master seed.
    pub seed: u64,
    /// Worker pool.
    pub workers: Workers,
    /// Directory against which relative paths in the configuration resolve.
    pub base_dir: Option<PathBuf>,
}

impl Context {
    /// Builds the context: `seed_override` (from `--seed`) wins over the
    /// configuration's top-level `seed` key.
    pub fn new(cfg: &RunConfig, seed_override: Option<u64>, workers: usize, base_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let seed = match seed_override {
            Some(s) => s,
            None => cfg.u64_or("seed", DEFAULT_SEED)?,
        };
        Ok(Context { seed, workers: Workers::new(workers)?, base_dir })
    }

    /// The base directory as a path.
    pub fn base(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }
}

/// A subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Remainder table and bounds.
    Bound,
    /// Rate experiment.
    Simulate,
    /// Cumulant matching.
    Match,
    /// Tail bounds over a grid.
    Tail,
    /// Stein-equation solutions and residuals.
    Stein,
    /// Golden-value self-test.
    Selftest,
}

/// Runs `cmd`. The second element lists failed self-test checks (always
/// empty for the other commands); the report is returned either way so it
/// can be written before the failure is signalled.
pub fn execute(cmd: Command, cfg: &RunConfig, ctx: &Context) -> Result<(CommandOutput, Vec<String>), CliError> {
    let plain = |r: Result<CommandOutput, CliError>| r.map(|o| (o, Vec::new()));
    match cmd {
        Command::Bound => plain(bound::run(cfg, ctx)),
        Command::Simulate => plain(simulate::run(cfg, ctx)),
        Command::Match => plain(matching::run(cfg, ctx)),
        Command::Tail => plain(tail::run(cfg, ctx)),
        Command::Stein => plain(stein::run(cfg, ctx)),
        Command::Selftest => selftest::run(cfg, ctx),
    }
}

/// Every key a configuration may contain. One file can configure several
/// commands; a key outside this list is reported as a typo.
pub fn known_keys() -> Vec<&'static str> {
    let mut keys = vec!["seed"];
    for group in [
        MODEL_KEYS,
        bound::KEYS,
        simulate::KEYS,
        matching::KEYS,
        tail::KEYS,
        stein::KEYS,
        selftest::KEYS,
    ] {
        keys.extend_from_slice(group);
    }
    keys
}

/// Result of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    /// File stem for the written reports.
    pub name: String,
    /// The JSON document.
    pub json: Value,
    /// The tabular view (CSV and text).
    pub table: Table,
    /// Additional files `(name, contents)`.
    pub extra: Vec<(String, String)>,
}

impl CommandOutput {
    /// Renders the main report in the requested format.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => formats::to_json(&self.json),
            Format::Csv => self.table.to_csv(),
            Format::Table => self.table.to_text(),
        }
    }

    /// All files of the report: `NAME.json`, `NAME.csv`, `NAME.txt` and the
    /// extras.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![
            (format!("{}.json", self.name), self.render(Format::Json)),
            (format!("{}.csv", self.name), self.render(Format::Csv)),
            (format!("{}.txt", self.name), self.render(Format::Table)),
        ];
        out.extend(self.extra.iter().cloned());
        out
    }

    /// Writes [`CommandOutput::files`] into `dir` (created if needed).
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, contents) in self.files() {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// A threshold or evaluation grid: either an explicit list under `key`, or
/// `key_min`, `key_max`, `key_count` for an evenly spaced grid.
pub(crate) fn grid(cfg: &RunConfig, key: &str) -> Result<Vec<f64>, CliError> {
    if cfg.contains(key) {
        let v = cfg.f64_list(key)?;
        if v.is_empty() {
            return Err(cfg.invalid(key, "grid must not be empty").into());
        }
        return Ok(v);
    }
    let (kmin, kmax, kcount) = (format!("{key}_min"), format!("{key}_max"), format!("{key}_count"));
    let (lo, hi) = (cfg.f64(&kmin)?, cfg.f64(&kmax)?);
    let count = cfg.u64(&kcount)? as usize;
    if count == 0 {
        return Err(cfg.invalid(&kcount, "must be at least 1").into());
    }
    if count > 1 && !(hi > lo) {
        return Err(cfg.invalid(&kmax, format!("must exceed {kmin}")).into());
    }
    Ok((0..count)
        .map(|i| if count == 1 { lo } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
        .collect())
}

/// Reads an order `p ≥ 1`.
pub(crate) fn order_p(cfg: &RunConfig, key: &str) -> Result<f64, CliError> {
    let p = cfg.f64(key)?;
    if !(p >= 1.0) {
        return Err(cfg.invalid(key, format!("p = {p} must be at least 1")).into());
    }
    Ok(p)
}

/// Moment or cumulant sequence as `{"order": N, "values": [...]}`.
pub(crate) fn sequence_json(order: usize, values: &[f64]) -> Value {
    serde_json::json!({ "order": order, "values": values })
}

pub(crate) fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise to JSON")
}
