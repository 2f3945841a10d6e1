use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrices::ErrorCoeffs;
use crate::model::{PhysicalParams, SystemParams};

/// Names a sweep axis may carry.
pub const AXIS_NAMES: &[&str] = &[
    "g", "G", "delta_a", "delta_b", "kappa_a", "kappa_b", "kappa_m", "n_a", "n_b", "n_m",
    "gamma", "eta", "temp_k", "ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepAxis {
    pub fn new(name: &str, start: f64, stop: f64, count: usize) -> Self {
        Self {
            name: name.to_string(),
            start,
            stop,
            count,
        }
    }

    /// Inclusive linear spacing; a single point sits at `start`.
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        n => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Sampling times, either absolute or in units of `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Times {
    Explicit(Vec<f64>),
    TauFractions(Vec<f64>),
    Grid { points: usize, stop_tau: f64 },
}

impl Default for Times {
    fn default() -> Self {
        Times::Grid {
            points: 512,
            stop_tau: 1.5,
        }
    }
}

impl Times {
    pub fn resolve(&self, tau: f64) -> Vec<f64> {
        match self {
            Times::Explicit(ts) => ts.clone(),
            Times::TauFractions(fs) => fs.iter().map(|f| f * tau).collect(),
            Times::Grid { points, stop_tau } => linspace(0.0, stop_tau * tau, *points),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Times::Explicit(ts) | Times::TauFractions(ts) => {
                !ts.is_empty() && ts.iter().all(|t| t.is_finite() && *t >= 0.0)
            }
            Times::Grid { points, stop_tau } => *points >= 1 && stop_tau.is_finite() && *stop_tau >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("time points must be finite, ≥ 0 and non-empty".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub json: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            csv: true,
            json: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "SystemParams::fig2_defaults")]
    pub system: SystemParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorCoeffs>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub times: Times,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::fig2_defaults(),
            physical: None,
            errors: None,
            sweep: vec![],
            times: Times::default(),
            output: OutputSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.system
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(ph) = &self.physical {
            ph.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(e) = &self.errors {
            if !(e.gamma.is_finite() && e.eta.is_finite()) {
                return Err(Error::Config("error coefficients must be finite".into()));
            }
        }
        for ax in &self.sweep {
            if !AXIS_NAMES.contains(&ax.name.as_str()) {
                return Err(Error::Config(format!("unknown sweep axis `{}`", ax.name)));
            }
            if ax.count < 1 {
                return Err(Error::Config(format!("axis `{}` needs count ≥ 1", ax.name)));
            }
            if !(ax.start.is_finite() && ax.stop.is_finite()) {
                return Err(Error::Config(format!("axis `{}` has a non-finite bound", ax.name)));
            }
        }
        self.times.validate()
    }

    pub fn axis(&self, name: &str) -> Option<&SweepAxis> {
        self.sweep.iter().find(|a| a.name == name)
    }

    /// Values of axis `name`, or `default` when the config does not sweep it.
    pub fn axis_values_or(&self, name: &str, default: &[f64]) -> Vec<f64> {
        self.axis(name).map_or_else(|| default.to_vec(), SweepAxis::values)
    }

    pub fn physical_or_default(&self) -> PhysicalParams {
        self.physical.unwrap_or_default()
    }

    /// Parse a JSON document, apply `key.path=value` overrides and validate.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        Self::from_value(&mut doc, overrides)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, overrides)
    }

    /// Start from `base` (serialized) and apply overrides.
    pub fn with_overrides(base: &RunConfig, overrides: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(base)?;
        Self::from_value(&mut doc, overrides)
    }

    /// Overrides land on the defaulted document, so a single key can be set
    /// without restating its siblings.
    fn from_value(doc: &mut Value, overrides: &[String]) -> Result<Self> {
        let schema = |v: Value| -> Result<RunConfig> {
            serde_json::from_value(v).map_err(|e| Error::Config(format!("config schema: {e}")))
        };
        let mut full = serde_json::to_value(schema(doc.clone())?)?;
        for o in overrides {
            apply_override(&mut full, o)?;
        }
        let cfg = schema(full)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Set `doc[a][b]... = value` from `"a.b=value"`. The value is read as JSON
/// when it parses, otherwise as a string. Missing objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path `{path}`")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = doc;
    for k in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}` descends into a non-object")))?;
        node = obj
            .entry(k.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override `{path}` descends into a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
