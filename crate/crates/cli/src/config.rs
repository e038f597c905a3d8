//! Run configuration: JSON file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use bohmflow::{GridSpec, SamplerMode, SamplerSpec, TwoSlitParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hbar: f64,
    pub mass: f64,
    pub sigma0: f64,
    pub d: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            sigma0: 0.5,
            d: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -128.0,
            x_max: 128.0,
            n: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Propagator and trajectory step.
    pub dt: f64,
    /// Field frames and stored trajectory points every this many steps.
    pub emit_every: usize,
    /// Numeric mode: velocity frames for trajectories every this many steps.
    pub velocity_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: 1e-3,
            emit_every: 1000,
            velocity_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub count: usize,
    pub mode: SamplerMode,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: 2000,
            mode: SamplerMode::Quantile,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub sampler: SamplerConfig,
    pub mode: Mode,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            sampler: SamplerConfig::default(),
            mode: Mode::Analytic,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` in order and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?
            }
            None => Value::Object(Default::default()),
        };
        let mut problems = Vec::new();
        for item in overrides {
            if let Err(e) = apply_override(&mut value, item) {
                problems.push(e);
            }
        }
        if !problems.is_empty() {
            return Err(CliError::Config(problems));
        }
        let config: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    /// Collects every violated constraint into one error.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be finite and > 0, got {v}"));
            }
        };
        positive("model.hbar", self.model.hbar);
        positive("model.mass", self.model.mass);
        positive("model.sigma0", self.model.sigma0);
        positive("time.t_final", self.time.t_final);
        positive("time.dt", self.time.dt);
        if !(self.model.d.is_finite() && self.model.d >= 0.0) {
            problems.push(format!("model.d must be finite and >= 0, got {}", self.model.d));
        }
        if !(self.grid.x_min.is_finite() && self.grid.x_max.is_finite() && self.grid.x_max > self.grid.x_min) {
            problems.push(format!(
                "grid.x_max must exceed grid.x_min, got [{}, {}]",
                self.grid.x_min, self.grid.x_max
            ));
        }
        if !(self.grid.n >= 16 && self.grid.n.is_power_of_two()) {
            problems.push(format!("grid.n must be a power of two >= 16, got {}", self.grid.n));
        }
        if self.time.emit_every == 0 {
            problems.push("time.emit_every must be >= 1".into());
        }
        if self.time.velocity_every == 0 {
            problems.push("time.velocity_every must be >= 1".into());
        }
        if self.sampler.count == 0 {
            problems.push("sampler.count must be >= 1".into());
        }
        if self.output.as_os_str().is_empty() {
            problems.push("output must not be empty".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    pub fn params(&self) -> TwoSlitParams {
        TwoSlitParams::new(self.model.hbar, self.model.mass, self.model.sigma0, self.model.d)
            .expect("validated")
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.grid.x_min, self.grid.x_max, self.grid.n).expect("validated")
    }

    pub fn sampler(&self) -> SamplerSpec {
        SamplerSpec {
            count: self.sampler.count,
            mode: self.sampler.mode,
            seed: self.sampler.seed,
        }
    }

    /// Times at which frames and trajectory points are emitted: every
    /// `emit_every` steps and always `t_final`.
    pub fn emit_times(&self) -> Vec<f64> {
        step_times(self.time.t_final, self.time.dt, self.time.emit_every)
    }
}

pub fn step_times(t_final: f64, dt: f64, every: usize) -> Vec<f64> {
    let ratio = t_final / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let mut times: Vec<f64> = (0..steps).step_by(every).map(|k| k as f64 * dt).collect();
    times.push(t_final);
    times
}

/// `a.b.c=value`; the value is read as JSON when it parses, as a string otherwise.
fn apply_override(root: &mut Value, item: &str) -> Result<(), String> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| format!("override `{item}` is not of the form key=value"))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(format!("override `{item}` has an empty key segment"));
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| format!("override `{item}`: `{}` is not a table", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

/// Shortest decimal form of an emission time, used in file names.
pub fn time_label(t: f64) -> String {
    let s = format!("{:.9}", t);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}
