//! Flat `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! # comment
//! [model]
//! generator = mdep_ma
//! sizes = 256, 512, 1024
//! ```
//!
//! Keys are addressed as `section.key` (keys before any header live in the
//! unnamed section and are addressed by their bare name). Values are
//! trimmed strings; lists are comma-separated. Every lookup error names the
//! key and, when the key exists, the line it came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// A configuration problem with its location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, when the problem is tied to a line.
    pub line: Option<usize>,
    /// Fully qualified key, when the problem is tied to a key.
    pub key: Option<String>,
    /// Description.
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key '{k}': {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "key '{k}': {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// A parsed configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, Entry>,
}

fn err(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: key.map(str::to_string), message: message.into() }
}

impl RunConfig {
    /// Parses configuration text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(Some(line), None, "unterminated section header"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err(Some(line), None, format!("invalid section name '{name}'")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| err(Some(line), None, format!("expected 'key = value', found '{content}'")))?;
            let k = k.trim();
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(Some(line), None, format!("invalid key '{k}'")));
            }
            let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            let entry = Entry { value: v.trim().to_string(), line };
            if let Some(prev) = entries.insert(full.clone(), entry) {
                return Err(err(Some(line), Some(&full), format!("duplicate key (first set on line {})", prev.line)));
            }
        }
        Ok(RunConfig { entries })
    }

    /// Reads and parses a file; a missing file is reported as a config error.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(None, None, format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_allowed(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (k, e) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(err(Some(e.line), Some(k), "unknown key"));
            }
        }
        Ok(())
    }

    /// `true` when the key is set.
    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Sets or replaces a value (used for command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), line: 0 });
    }

    fn entry(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.entries.get(key).ok_or_else(|| err(None, Some(key), "required key is missing"))
    }

    fn line_of(e: &Entry) -> Option<usize> {
        (e.line > 0).then_some(e.line)
    }

    /// Raw string value.
    pub fn str(&self, key: &str) -> Result<&str, ConfigError> {
        Ok(&self.entry(key)?.value)
    }

    /// Optional string value.
    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parse_with<T>(&self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<T, ConfigError> {
        let e = self.entry(key)?;
        f(&e.value).ok_or_else(|| err(Self::line_of(e), Some(key), format!("expected {what}, found '{}'", e.value)))
    }

    /// A finite real number.
    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.parse_with(key, "a finite number", |s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
    }

    /// A finite real number, or `default` when absent.
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        if self.contains(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    /// An unsigned 64-bit integer.
    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.parse_with(key, "an unsigned integer", |s| s.replace('_', "").parse::<u64>().ok())
    }

    /// An unsigned integer, or `default` when absent.
    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        if self.contains(key) {
            self.u64(key)
        } else {
            Ok(default)
        }
    }

    /// A boolean (`true`/`false`).
    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        if !self.contains(key) {
            return Ok(default);
        }
        self.parse_with(key, "true or false", |s| match s {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    /// A comma-separated list of finite numbers (may be empty).
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.list(key, "a comma-separated list of numbers", |s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
    }

    /// A comma-separated list of unsigned integers (may be empty).
    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.list(key, "a comma-separated list of unsigned integers", |s| s.replace('_', "").parse::<usize>().ok())
    }

    fn list<T>(&self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ConfigError> {
        let e = self.entry(key)?;
        if e.value.is_empty() {
            return Ok(Vec::new());
        }
        e.value
            .split(',')
            .map(|item| {
                f(item.trim()).ok_or_else(|| {
                    err(Self::line_of(e), Some(key), format!("expected {what}, found item '{}'", item.trim()))
                })
            })
            .collect()
    }

    /// A validation failure for an existing key, carrying its line.
    pub fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.entries.get(key).and_then(Self::line_of);
        err(line, Some(key), message)
    }
}
