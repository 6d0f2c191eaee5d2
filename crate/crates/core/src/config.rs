//! Resolved run configuration: flags merged over an optional JSON file,
//! hashed for the output metadata.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Rates, RatesError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required option --{0}")]
    Missing(&'static str),
    #[error("invalid value for --{name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error("config file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Every option any command reads. Unset fields stay `None` so that a flag
/// can be told apart from a file value. `out` and `jobs` do not change the
/// content of a run and are left out of the serialized form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_range: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lm_range: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points_per_unit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub what: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classify: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing)]
    pub out: Option<String>,
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

macro_rules! merge_fields {
    ($hi:ident, $lo:ident; $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Field-wise: values set in `self` win over `file`.
    pub fn merged_over(self, file: RunConfig) -> RunConfig {
        let hi = self;
        let lo = file;
        merge_fields!(hi, lo; lp, lm, mu, m, seed, mode, cycles, tol, method, lp_range, lm_range,
            depth, s_max, points_per_unit, samples, max_time, max_events, what, events, seeds,
            table, classify, format, out, jobs)
    }

    /// Canonical JSON of the content-affecting options.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn rates(&self) -> Result<Rates, ConfigError> {
        let lp = self.lp.ok_or(ConfigError::Missing("lp"))?;
        let lm = self.lm.ok_or(ConfigError::Missing("lm"))?;
        let mu = self.mu.ok_or(ConfigError::Missing("mu"))?;
        Ok(Rates::new(lp, lm, mu)?)
    }
}
