//! Flag and config-file handling.
//!
//! Every flag may also be given in a flat `key=value` file passed with
//! `--config`; keys are the flag names without dashes. Flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::UsageError;

#[derive(Debug, Clone, Default, Args)]
pub struct RawArgs {
    /// List size N, or a comma-separated list for `scaling`
    #[arg(long)]
    pub n: Option<String>,
    /// Oracle-step duration t
    #[arg(long)]
    pub t: Option<String>,
    /// Dimensionless product x·t = t/√N (exclusive with --t)
    #[arg(long)]
    pub xt: Option<String>,
    /// Query count K: a single value, a list `1,10,100`, or a range `1..20`
    #[arg(long)]
    pub k: Option<String>,
    /// Decoherence parameter δ, or a comma-separated grid
    #[arg(long)]
    pub delta: Option<String>,
    /// Success-probability threshold for search times
    #[arg(long)]
    pub threshold: Option<String>,
    /// Output file; a `<out>.manifest.json` is written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long)]
    pub format: Option<String>,
    /// Worker threads for grid evaluation
    #[arg(long)]
    pub jobs: Option<String>,
    /// Run the reduced verification subset
    #[arg(long)]
    pub quick: bool,
    /// Include the full Gram matrix (K <= 12)
    #[arg(long)]
    pub full: bool,
    /// Flat key=value file mirroring the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "t",
    "xt",
    "k",
    "delta",
    "threshold",
    "out",
    "format",
    "jobs",
    "quick",
    "full",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags merged with the optional config file, as strings.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError::new(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            UsageError::new(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().trim_start_matches("--").to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(UsageError::new(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                lineno + 1
            )));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(raw: &RawArgs) -> Result<Self, UsageError> {
        let mut values = match &raw.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        let flags: [(&str, Option<String>); 9] = [
            ("n", raw.n.clone()),
            ("t", raw.t.clone()),
            ("xt", raw.xt.clone()),
            ("k", raw.k.clone()),
            ("delta", raw.delta.clone()),
            ("threshold", raw.threshold.clone()),
            ("out", raw.out.as_ref().map(|p| p.display().to_string())),
            ("format", raw.format.clone()),
            ("jobs", raw.jobs.clone()),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                values.insert(key.to_string(), v);
            }
        }
        if raw.quick {
            values.insert("quick".into(), "true".into());
        }
        if raw.full {
            values.insert("full".into(), "true".into());
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn flag(&self, key: &str) -> Result<bool, UsageError> {
        match self.get(key) {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(UsageError::new(format!(
                "--{key}: expected a boolean, got {other:?}"
            ))),
        }
    }

    pub fn n(&self) -> Result<u64, UsageError> {
        let raw = self
            .get("n")
            .ok_or_else(|| UsageError::new("--n is required"))?;
        parse_n(raw)
    }

    pub fn n_list(&self) -> Result<Vec<u64>, UsageError> {
        let raw = self
            .get("n")
            .ok_or_else(|| UsageError::new("--n is required"))?;
        raw.split(',').map(|s| parse_n(s.trim())).collect()
    }

    /// Resolves t from --t or --xt (exactly one may be given).
    pub fn time(&self, n: u64) -> Result<f64, UsageError> {
        match (self.get("t"), self.get("xt")) {
            (Some(_), Some(_)) => Err(UsageError::new("--t and --xt are mutually exclusive")),
            (Some(t), None) => {
                let t = parse_f64("t", t)?;
                if t < 0.0 {
                    return Err(UsageError::new(format!("--t must be >= 0, got {t}")));
                }
                Ok(t)
            }
            (None, Some(xt)) => {
                let xt = parse_f64("xt", xt)?;
                if xt < 0.0 {
                    return Err(UsageError::new(format!("--xt must be >= 0, got {xt}")));
                }
                Ok(xt * (n as f64).sqrt())
            }
            (None, None) => Err(UsageError::new("one of --t or --xt is required")),
        }
    }

    /// t without N-dependence; --xt is rejected.
    pub fn fixed_time(&self, default: f64) -> Result<f64, UsageError> {
        if self.get("xt").is_some() {
            return Err(UsageError::new("--xt is not allowed here; give --t"));
        }
        match self.get("t") {
            Some(t) => {
                let t = parse_f64("t", t)?;
                if t < 0.0 {
                    return Err(UsageError::new(format!("--t must be >= 0, got {t}")));
                }
                Ok(t)
            }
            None => Ok(default),
        }
    }

    pub fn k(&self) -> Result<usize, UsageError> {
        let raw = self
            .get("k")
            .ok_or_else(|| UsageError::new("--k is required"))?;
        parse_k(raw)
    }

    pub fn k_list(&self) -> Result<Option<Vec<usize>>, UsageError> {
        let Some(raw) = self.get("k") else {
            return Ok(None);
        };
        if let Some((a, b)) = raw.split_once("..") {
            let (lo, hi) = (
                parse_k(a.trim())?,
                parse_k(b.trim().trim_start_matches('='))?,
            );
            if lo > hi {
                return Err(UsageError::new(format!("empty K range {raw}")));
            }
            return Ok(Some((lo..=hi).collect()));
        }
        raw.split(',')
            .map(|s| parse_k(s.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn delta_list(&self, default: &[f64]) -> Result<Vec<f64>, UsageError> {
        let Some(raw) = self.get("delta") else {
            return Ok(default.to_vec());
        };
        raw.split(',')
            .map(|s| {
                let v = parse_f64("delta", s.trim())?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(UsageError::new(format!(
                        "--delta must lie in [0, 1], got {v}"
                    )));
                }
                Ok(v)
            })
            .collect()
    }

    pub fn delta(&self) -> Result<f64, UsageError> {
        let list = self.delta_list(&[])?;
        match list.as_slice() {
            [v] => Ok(*v),
            [] => Err(UsageError::new("--delta is required")),
            _ => Err(UsageError::new("--delta takes a single value here")),
        }
    }

    pub fn threshold(&self, default: f64) -> Result<f64, UsageError> {
        match self.get("threshold") {
            None => Ok(default),
            Some(raw) => {
                let v = parse_f64("threshold", raw)?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(UsageError::new(format!(
                        "--threshold must lie in (0, 1), got {v}"
                    )));
                }
                Ok(v)
            }
        }
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.get("out").map(PathBuf::from)
    }

    pub fn format(&self, default: Format) -> Result<Format, UsageError> {
        match self.get("format") {
            None => Ok(default),
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(other) => Err(UsageError::new(format!(
                "--format must be csv or json, got {other:?}"
            ))),
        }
    }

    pub fn jobs(&self) -> Result<usize, UsageError> {
        match self.get("jobs") {
            None => Ok(1),
            Some(raw) => match raw.parse::<usize>() {
                Ok(j) if j >= 1 => Ok(j),
                _ => Err(UsageError::new(format!(
                    "--jobs must be a positive integer, got {raw:?}"
                ))),
            },
        }
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, UsageError> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(UsageError::new(format!(
            "--{key}: expected a finite number, got {raw:?}"
        ))),
    }
}

fn parse_n(raw: &str) -> Result<u64, UsageError> {
    match raw.parse::<u64>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(UsageError::new(format!(
            "--n must be an integer >= 2, got {raw:?}"
        ))),
    }
}

fn parse_k(raw: &str) -> Result<usize, UsageError> {
    match raw.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(UsageError::new(format!(
            "--k must be an integer >= 1, got {raw:?}"
        ))),
    }
}
