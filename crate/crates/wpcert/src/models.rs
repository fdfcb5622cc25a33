//! Model construction from the `[model]` section of a configuration.
//!
//! A model is either an exact discrete law read from a JSON file
//! (`file = model.json`, optionally `edges = graph.txt`) or a registered
//! generator (`generator = mdep_ma | ustat | fixed` with its parameters).

use std::path::{Path, PathBuf};

use wpcert_core::rsums::JointModel;
use wpcert_core::sim::{GeneratorSpec, InnovationLaw, Kernel};

use crate::formats;
use crate::parallel::{self, Workers};
use crate::{CliError, RunConfig};

/// Keys of the `[model]` section.
pub const MODEL_KEYS: &[&str] = &[
    "model.file",
    "model.edges",
    "model.generator",
    "model.d",
    "model.side",
    "model.m",
    "model.law",
    "model.kernel",
    "model.n",
    "model.reps",
];

/// Default number of replicates of a generator-backed sampled model.
pub const DEFAULT_MODEL_REPS: u64 = 2000;

/// Resolves a path from the configuration relative to the config file's
/// directory (absolute paths are kept).
pub fn resolve(base: Option<&Path>, value: &str) -> PathBuf {
    let p = Path::new(value);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

fn read_referenced(cfg: &RunConfig, key: &str, base: Option<&Path>) -> Result<String, CliError> {
    let path = resolve(base, cfg.str(key)?);
    std::fs::read_to_string(&path)
        .map_err(|e| cfg.invalid(key, format!("cannot read referenced file {}: {e}", path.display())).into())
}

/// The generator described by `[model]`, if any. Size keys (`side`, `n`)
/// are required only when `need_size` is set; otherwise a placeholder size
/// is used and the caller substitutes sizes with
/// [`GeneratorSpec::with_size`].
pub fn generator(cfg: &RunConfig, need_size: bool) -> Result<Option<GeneratorSpec>, CliError> {
    let Some(name) = cfg.opt_str("model.generator") else {
        return Ok(None);
    };
    let law = match cfg.opt_str("model.law") {
        Some(s) => InnovationLaw::parse(s).map_err(|e| cfg.invalid("model.law", e.to_string()))?,
        None => InnovationLaw::Rademacher,
    };
    let size = |key: &str| -> Result<usize, CliError> {
        if need_size || cfg.contains(key) {
            let v = cfg.u64(key)? as usize;
            if v == 0 {
                return Err(cfg.invalid(key, "must be positive").into());
            }
            Ok(v)
        } else {
            Ok(2)
        }
    };
    let spec = match name {
        "mdep_ma" => GeneratorSpec::MdepMa {
            d: cfg.u64_or("model.d", 1)? as usize,
            side: size("model.side")?,
            m: cfg.u64_or("model.m", 1)? as usize,
            law,
        },
        "ustat" => GeneratorSpec::UStat {
            kernel: match cfg.opt_str("model.kernel") {
                Some(s) => Kernel::parse(s).map_err(|e| cfg.invalid("model.kernel", e.to_string()))?,
                None => Kernel::Sum,
            },
            law,
            n: size("model.n")?,
        },
        "fixed" => GeneratorSpec::Fixed { law },
        other => {
            return Err(cfg
                .invalid("model.generator", format!("unknown generator '{other}' (expected mdep_ma, ustat or fixed)"))
                .into())
        }
    };
    spec.validate().map_err(|e| cfg.invalid("model.generator", e.to_string()))?;
    Ok(Some(spec))
}

/// A model ready for the remainder engine.
pub struct LoadedModel {
    /// The joint model.
    pub model: JointModel,
    /// The generator, for sampled models.
    pub generator: Option<GeneratorSpec>,
    /// Replicates drawn, for sampled models.
    pub reps: Option<u64>,
}

/// Loads the model of `[model]`: an exact JSON model, or a sampled model
/// with `model.reps` replicates of the generator.
pub fn load(cfg: &RunConfig, base: Option<&Path>, seed: u64, workers: &Workers) -> Result<LoadedModel, CliError> {
    match (cfg.contains("model.file"), cfg.contains("model.generator")) {
        (true, true) => Err(cfg.invalid("model.generator", "give either model.file or model.generator, not both").into()),
        (false, false) => Err(CliError::Config(crate::ConfigError {
            line: None,
            key: Some("model.file".into()),
            message: "a model is required: set model.file or model.generator".into(),
        })),
        (true, false) => {
            let text = read_referenced(cfg, "model.file", base)?;
            let graph = if cfg.contains("model.edges") {
                let edges = read_referenced(cfg, "model.edges", base)?;
                Some(formats::parse_edge_list(&edges).map_err(|e| cfg.invalid("model.edges", e.to_string()))?)
            } else {
                None
            };
            let model = formats::parse_exact_model(&text, graph).map_err(|e| cfg.invalid("model.file", e.to_string()))?;
            Ok(LoadedModel { model, generator: None, reps: None })
        }
        (false, true) => {
            let spec = generator(cfg, true)?.expect("generator key present");
            let reps = cfg.u64_or("model.reps", DEFAULT_MODEL_REPS)?;
            if reps < 2 {
                return Err(cfg.invalid("model.reps", "need at least 2 replicates").into());
            }
            let model = parallel::sampled_model(&spec, reps, seed, workers)?;
            Ok(LoadedModel { model, generator: Some(spec), reps: Some(reps) })
        }
    }
}
