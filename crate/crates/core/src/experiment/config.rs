use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::EstimatorSpec;
use crate::ingest::{SynthParams, DEFAULT_CELL_SIZE_M, SLOTS_PER_DAY};
use crate::metrics::DEFAULT_LAMBDA_TH;
use crate::power::PowerParams;
use crate::scalar::Scalar;
use crate::switching::{SinkSet, DEFAULT_EXHAUSTIVE_LIMIT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Greedy,
    /// Exhaustive search; networks above `exhaustive_limit` SBSs use greedy.
    Exhaustive,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Greedy => "greedy",
            OptimizerKind::Exhaustive => "exhaustive",
        }
    }
}

/// Real traffic: a profile cache CSV, or a directory of CDR files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default = "default_grid_side")]
    pub grid_side: u32,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    /// Days to average CDR activity over; defaults to the number of distinct
    /// days present in the records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day_count: Option<usize>,
}

fn default_grid_side() -> u32 {
    100
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_M
}

/// EARTH-model coefficients of one tier, in watts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierPower {
    pub operational: f64,
    pub amplifier_efficiency: f64,
    pub transmit: f64,
    pub sleep: f64,
}

impl TierPower {
    pub fn to_params<T: Scalar>(self) -> Result<PowerParams<T>> {
        PowerParams::new(
            T::lit(self.operational),
            T::lit(self.amplifier_efficiency),
            T::lit(self.transmit),
            T::lit(self.sleep),
        )
    }
}

/// Placeholder coefficients in the spirit of the EARTH model; not measured values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub sbs: TierPower,
    pub mbs: TierPower,
    pub haps: TierPower,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            sbs: TierPower {
                operational: 56.0,
                amplifier_efficiency: 2.6,
                transmit: 6.3,
                sleep: 39.0,
            },
            mbs: TierPower {
                operational: 130.0,
                amplifier_efficiency: 4.7,
                transmit: 170.0,
                sleep: 75.0,
            },
            haps: TierPower {
                operational: 1000.0,
                amplifier_efficiency: 4.7,
                transmit: 380.0,
                sleep: 500.0,
            },
        }
    }
}

/// Capacities in a common traffic unit; only their ratios matter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub sbs: f64,
    pub mbs: f64,
    pub haps: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            sbs: 1.0,
            mbs: 10.0,
            haps: 20.0,
        }
    }
}

/// Own load factors of the MBS and HAPS before any offloading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseLoadConfig {
    pub mbs: f64,
    pub haps: f64,
}

impl Default for BaseLoadConfig {
    fn default() -> Self {
        Self {
            mbs: 0.4,
            haps: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sbs_count")]
    pub sbs_count: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_slots")]
    pub slots: usize,
    #[serde(default = "default_lambda_th")]
    pub lambda_th: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub offload_sinks: SinkSet,
    #[serde(default = "default_exhaustive_limit")]
    pub exhaustive_limit: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthParams>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub base_load: BaseLoadConfig,
}

fn default_sbs_count() -> usize {
    10
}

fn default_iterations() -> usize {
    300
}

fn default_slots() -> usize {
    SLOTS_PER_DAY
}

fn default_lambda_th() -> f64 {
    DEFAULT_LAMBDA_TH
}

fn default_exhaustive_limit() -> usize {
    DEFAULT_EXHAUSTIVE_LIMIT
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// Defaults everywhere, traffic from the synthetic generator.
    pub fn synthetic(synth: SynthParams) -> Self {
        let mut cfg: Self = toml::from_str("[synth]").expect("defaults deserialize");
        cfg.synth = Some(synth);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, msg));
        match (&self.dataset, &self.synth) {
            (None, None) => return bad("dataset", "missing: give [dataset] or [synth]"),
            (Some(_), Some(_)) => {
                return bad("synth", "[dataset] and [synth] are mutually exclusive")
            }
            (Some(d), None) => {
                if d.grid_side == 0 {
                    return bad("dataset.grid_side", "must be at least 1");
                }
                if !(d.cell_size_m > 0.0 && d.cell_size_m.is_finite()) {
                    return bad("dataset.cell_size_m", "must be positive");
                }
                if d.day_count == Some(0) {
                    return bad("dataset.day_count", "must be at least 1");
                }
            }
            (None, Some(s)) => s.validate()?,
        }
        if self.sbs_count == 0 {
            return bad("sbs_count", "must be at least 1");
        }
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1");
        }
        if !(1..=SLOTS_PER_DAY).contains(&self.slots) {
            return bad("slots", "must lie in 1..=144");
        }
        if !(self.lambda_th > 0.0 && self.lambda_th < 1.0) {
            return bad("lambda_th", "must lie in (0, 1)");
        }
        self.estimator.validate()?;
        for (key, tier) in [
            ("sbs", self.power.sbs),
            ("mbs", self.power.mbs),
            ("haps", self.power.haps),
        ] {
            tier.to_params::<f64>()
                .map_err(|e| Error::config(format!("power.{key}"), e.to_string()))?;
        }
        for (key, c) in [
            ("sbs", self.capacity.sbs),
            ("mbs", self.capacity.mbs),
            ("haps", self.capacity.haps),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config(format!("capacity.{key}"), "must be positive"));
            }
        }
        for (key, l) in [("mbs", self.base_load.mbs), ("haps", self.base_load.haps)] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::config(
                    format!("base_load.{key}"),
                    "must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    /// Resolved configuration as TOML; parsing it back gives an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses a config document, applies `key=value` overrides on dotted paths,
/// fills defaults and validates.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
    for (key, value) in overrides {
        apply_override(&mut doc, key, value)?;
    }
    let cfg: ExperimentConfig =
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| {
                Error::config(offending_key(e.message()), e.message().to_string())
            })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with(path, &[])
}

pub fn load_config_with(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, overrides)
}

/// Splits `key=value`.
pub fn parse_assignment(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::InvalidArgument(format!(
            "expected key=value, got {raw:?}"
        ))),
    }
}

/// Sets `dotted.key` to `raw`, read as a TOML value when it parses as one and
/// as a bare string otherwise.
pub fn apply_override(doc: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("{part} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn offending_key(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "config".to_string())
}
