//! Experiment configuration files.
//!
//! A config is one flat TOML table (or a manifest JSON written by an earlier
//! run, whose `config` object is reused). Keys shared by every command are
//! split off first; the rest must match the command's schema exactly.

use anyhow::{Context, Result};
use rdlab_core::hitting::NeighborhoodSpec;
use rdlab_core::model::LocalRate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A problem with the config itself, as opposed to a failed computation.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

macro_rules! reject {
    ($($arg:tt)*) => {
        return Err($crate::config::invalid(format!($($arg)*)))
    };
}
pub(crate) use reject;

/// Keys accepted by every command.
const COMMON_KEYS: &[&str] = &["command", "rate", "gamma", "radius", "table", "seed", "out", "threads"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    pub command: Option<String>,
    /// `"example-2.1"`, `"example-2.1-printed"` or `"table"`.
    #[serde(default = "default_rate")]
    pub rate: String,
    pub gamma: Option<f64>,
    pub radius: Option<usize>,
    pub table: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn default_rate() -> String {
    "example-2.1".into()
}

impl Common {
    pub fn local_rate(&self) -> Result<LocalRate> {
        let rate = match self.rate.as_str() {
            "example-2.1" | "example-2.1-printed" => {
                if self.table.is_some() || self.radius.is_some() {
                    reject!("rate: `table` and `radius` only apply to rate = \"table\"");
                }
                let g = self.gamma.ok_or_else(|| invalid(format!("gamma: required by rate = {:?}", self.rate)))?;
                if self.rate == "example-2.1" {
                    LocalRate::example_2_1(g)
                } else {
                    LocalRate::example_2_1_printed(g)
                }
            }
            "table" => {
                if self.gamma.is_some() {
                    reject!("gamma: only applies to the example-2.1 presets");
                }
                let radius = self.radius.ok_or_else(|| invalid("radius: required by rate = \"table\""))?;
                let table = self.table.clone().ok_or_else(|| invalid("table: required by rate = \"table\""))?;
                LocalRate::new(radius, table)
            }
            other => reject!("rate: unknown preset {other:?}"),
        };
        rate.map_err(|e| invalid(format!("rate: {e}")))
    }
}

/// A parsed config: the raw table (echoed into the manifest), the shared
/// keys and the command-specific remainder.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub raw: toml::Table,
    pub common: Common,
    rest: toml::Table,
}

impl Loaded {
    /// Deserializes the command-specific keys, rejecting unknown ones.
    pub fn command<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        T::deserialize(toml::Value::Table(self.rest.clone()))
            .map_err(|e| invalid(format!("invalid config for `{name}`: {}", e.message())))
    }
}

pub fn load(path: &Path, command: &str) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw = if path.extension().is_some_and(|e| e == "json") {
        let mut json: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(cfg) = json.get_mut("config") {
            json = cfg.take();
        }
        toml::Table::deserialize(json).map_err(|e| invalid(format!("config: {e}")))?
    } else {
        toml::from_str::<toml::Table>(&text).map_err(|e| invalid(format!("parsing {}: {}", path.display(), e.message())))?
    };
    parse(raw, command)
}

pub fn parse(raw: toml::Table, command: &str) -> Result<Loaded> {
    let mut common = toml::Table::new();
    let mut rest = raw.clone();
    for key in COMMON_KEYS {
        if let Some(v) = rest.remove(*key) {
            common.insert(key.to_string(), v);
        }
    }
    let common = Common::deserialize(toml::Value::Table(common)).map_err(|e| invalid(format!("config: {}", e.message())))?;
    if let Some(c) = &common.command {
        if c != command {
            reject!("command: config is for `{c}`, invoked as `{command}`");
        }
    }
    Ok(Loaded { raw, common, rest })
}

/// The three balls around a constant centre, validated as a unit.
pub fn neighborhood(center: f64, alpha: f64, beta: f64, escape_radius: f64, k_max: usize) -> Result<NeighborhoodSpec> {
    if !(0.0..=1.0).contains(&center) {
        reject!("center: must lie in [0, 1], got {center}");
    }
    if !(alpha > 0.0 && alpha < beta && 2.0 * beta < escape_radius) {
        reject!("radii: need 0 < alpha < beta and 2 beta < escape_radius, got alpha = {alpha}, beta = {beta}, escape_radius = {escape_radius}");
    }
    let slice = rdlab_core::hydro::DensitySlice::constant(1, center).map_err(|e| invalid(format!("center: {e}")))?;
    NeighborhoodSpec::new(slice, alpha, beta, escape_radius, k_max).map_err(|e| invalid(format!("radii: {e}")))
}

pub fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        reject!("{name}: must be positive and finite, got {v}");
    }
    Ok(())
}

pub fn probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        reject!("{name}: must lie in [0, 1], got {v}");
    }
    Ok(())
}
