//! Plain-text run configuration: one `key.subkey = value` per line,
//! `#` comments. The format is deliberately trivial so a resolved copy can
//! be embedded verbatim in every output header.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Errors split by exit code: configuration problems exit 1,
/// runtime/validation failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<hops_core::HopsError> for CliError {
    fn from(e: hops_core::HopsError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Keys with built-in defaults, applied when the file does not set them.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("units.energy", "dimensionless"),
    ("bath.temperature", "0"),
    ("bath.n_pade", "0"),
    ("bath.tolerance", "1e-3"),
    ("bath.tau_max", "0"),
    ("bath.n_grid", "48"),
    ("noise.omega_max_factor", "10"),
    ("noise.clip_tol", "1e-8"),
    ("hierarchy.terminator", "rescaled"),
    ("hierarchy.max_indices", "2000000"),
    ("variant", "nonlinear"),
    ("system.initial_site", "0"),
    ("system.energy_shift", "0"),
    ("ensemble.seed", "1"),
    ("ensemble.workers", "0"),
    ("ensemble.abort_tolerance", "0.01"),
    ("spectrum.damping", "0"),
    ("spectrum.padding_factor", "4"),
    ("spectrum.decay_warn_fraction", "0.01"),
    ("validate.n_paths", "4000"),
    ("validate.threshold", "5"),
    ("validate.n_traj", "200"),
    ("validate.k_low", "2"),
    ("validate.k_high", "4"),
];

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Config> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {key}", i + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> CliResult<Config> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .get(key)
            .map(|s| s.as_str())
            .or_else(|| DEFAULTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key {key}")))
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("{key}: expected a number, got {v:?}")))
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("{key}: expected an integer, got {v:?}")))
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| CliError::Config(format!("{key}: expected an integer, got {v:?}")))
    }

    /// Semicolon-separated tuples of whitespace-separated numbers.
    pub fn tuple_list(&self, key: &str, arity: usize) -> CliResult<Vec<Vec<f64>>> {
        let v = self.require(key)?;
        let mut out = Vec::new();
        for (i, chunk) in v.split(';').enumerate() {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            let nums: Result<Vec<f64>, _> =
                chunk.split_whitespace().map(|t| t.parse::<f64>()).collect();
            let nums = nums.map_err(|_| {
                CliError::Config(format!("{key}: entry {}: expected numbers", i + 1))
            })?;
            if nums.len() != arity {
                return Err(CliError::Config(format!(
                    "{key}: entry {} has {} numbers, expected {arity}",
                    i + 1,
                    nums.len()
                )));
            }
            out.push(nums);
        }
        if out.is_empty() {
            return Err(CliError::Config(format!("{key}: empty list")));
        }
        Ok(out)
    }

    /// All keys with explicit entries overriding defaults, sorted.
    pub fn resolved_lines(&self) -> Vec<String> {
        let mut all: BTreeMap<&str, &str> = DEFAULTS.iter().cloned().collect();
        for (k, v) in &self.entries {
            all.insert(k.as_str(), v.as_str());
        }
        all.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_applies_defaults() {
        let c = Config::parse("# comment\n a.b = 3.5 \n\nname = hi\n").unwrap();
        assert_eq!(c.f64("a.b").unwrap(), 3.5);
        assert_eq!(c.get("name"), Some("hi"));
        assert_eq!(c.get("variant"), Some("nonlinear"));
        assert!(c.get("nope").is_none());
    }

    #[test]
    fn line_anchored_error() {
        let err = Config::parse("ok = 1\nbroken line\n").unwrap_err();
        assert!(format!("{err}").contains("line 2"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn tuple_lists() {
        let c = Config::parse("bath.terms = 2 0 0.5 2; 1 0 1 0\n").unwrap();
        let t = c.tuple_list("bath.terms", 4).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0], vec![2.0, 0.0, 0.5, 2.0]);
        assert!(c.tuple_list("bath.terms", 3).is_err());
    }

    #[test]
    fn resolved_lines_embed_overrides() {
        let mut c = Config::parse("ensemble.seed = 9\n").unwrap();
        c.set("ensemble.workers", "4".into());
        let lines = c.resolved_lines();
        assert!(lines.iter().any(|l| l == "ensemble.seed = 9"));
        assert!(lines.iter().any(|l| l == "ensemble.workers = 4"));
        assert!(lines.iter().any(|l| l == "variant = nonlinear"));
    }
}
