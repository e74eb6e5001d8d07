//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every accepted key with its default and a one-line description.
/// Command-line flags are generated from this table.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "", "libsvm training file; synthetic data is generated when empty"),
    ("test-data", "", "libsvm test file (kernel-train)"),
    ("output", "-", "report path, '-' for standard output"),
    ("model-out", "", "write the fitted (w, b) or (alpha, b) here"),
    ("seed", "0", "master seed"),
    ("norm", "l2", "regularizer norm on w: l1 | l2 | linf; disturbances are measured in its dual"),
    ("c", "1", "regularization coefficient"),
    ("max-iters", "100000", "solver iteration limit"),
    ("initial-step", "1", "solver step scale"),
    ("tolerance", "1e-10", "solver stall tolerance"),
    ("averaging", "true", "also try window averages of iterates"),
    ("generator", "gaussian-blobs", "gaussian-blobs | uniform-noise | replicated-with-noise"),
    ("m", "20", "number of samples"),
    ("dim", "2", "number of features"),
    ("separation", "2", "distance between the class means"),
    ("sigma", "1", "per-coordinate standard deviation of each class"),
    ("noise", "0.1", "disturbance scale of the replicated copy"),
    ("data-out", "", "where generate writes the dataset"),
    ("copy-output", "", "where generate writes the disturbed copy"),
    ("w", "", "comma-separated weights to evaluate (robust-eval); trains when empty"),
    ("b", "0", "offset to evaluate (robust-eval)"),
    ("radius", "1", "radius of the atomic norm ball"),
    ("instances", "100", "random instances (equivalence-check)"),
    ("resolution", "200", "brute-force grid resolution"),
    ("slack", "0.01", "accepted brute-force discretization gap"),
    ("source", "chance", "calibration source: chance | bayes"),
    ("eta", "0.1", "allowed violation probability"),
    ("draws", "100000", "Monte-Carlo draws"),
    ("disturbance", "uniform-budget", "zero | gaussian | uniform-ball | uniform-budget"),
    ("disturbance-scale", "1", "sigma, ball radius or maximum total budget of the disturbance"),
    ("prior", "point-mass:1", "point-mass:C | uniform:LO:HI | discrete:C@P,C@P,..."),
    ("train", "true", "train at the calibrated budget"),
    ("kernel", "rbf:1", "linear | poly:D | rbf:GAMMA | indicator"),
    ("sizes", "50,200,800", "comma-separated sample sizes"),
    ("trials", "20", "trials per size"),
    ("c-scale", "1", "c(m) = max(c-scale * m^(-c-exponent), c-floor)"),
    ("c-exponent", "0.125", "see c-scale"),
    ("c-floor", "0.05", "see c-scale"),
];

pub fn is_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

/// Effective configuration: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, d, _)| (k.to_string(), d.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
            let k = k.trim();
            if !is_key(k) {
                bail!("config line {}: unknown key '{k}'", i + 1);
            }
            out.insert(k.to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn load_file(path: &Path) -> Result<BTreeMap<String, String>> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_key(key) {
            bail!("unknown key '{key}'");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key '{key}' missing from the key table"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| anyhow!("invalid value '{raw}' for {key}: {e}"))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|e| anyhow!("invalid entry '{p}' in {key}: {e}"))
            })
            .collect()
    }

    /// `None` when the key is empty.
    pub fn path(&self, key: &str) -> Option<&str> {
        let raw = self.raw(key);
        (!raw.is_empty()).then_some(raw)
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}
