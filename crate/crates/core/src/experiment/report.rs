use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::ExperimentReport;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const LAYERS_FILE: &str = "layers.csv";

/// One CSV row. Undefined values are written as empty fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub iteration: usize,
    pub slot: usize,
    pub mean_eps: Option<f64>,
    pub power_true_w: f64,
    pub power_est_w: f64,
    pub decision_change: f64,
    pub p_off_on: Option<f64>,
    pub p_on_off: Option<f64>,
}

pub const ROW_HEADER: [&str; 8] = [
    "iteration",
    "slot",
    "mean_eps",
    "power_true_w",
    "power_est_w",
    "decision_change",
    "p_off_on",
    "p_on_off",
];

impl RowRecord {
    pub fn power_gap(&self) -> f64 {
        (self.power_est_w - self.power_true_w).abs() / self.power_true_w
    }
}

/// Count, mean and sample standard deviation of the defined values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let count = values.len();
        if count == 0 {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat {
            count,
            mean: Some(mean),
            std: Some(std),
        }
    }
}

/// Aggregates over all rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub mean_eps: Stat,
    pub power_true_w: Stat,
    pub power_est_w: Stat,
    /// Per-row `|P_est - P_T| / P_T`.
    pub power_gap: Stat,
    pub decision_change: Stat,
    pub p_off_on: Stat,
    pub p_on_off: Stat,
}

impl RowStats {
    pub fn of(rows: &[RowRecord]) -> Self {
        RowStats {
            mean_eps: Stat::of(rows.iter().filter_map(|r| r.mean_eps)),
            power_true_w: Stat::of(rows.iter().map(|r| r.power_true_w)),
            power_est_w: Stat::of(rows.iter().map(|r| r.power_est_w)),
            power_gap: Stat::of(rows.iter().map(RowRecord::power_gap)),
            decision_change: Stat::of(rows.iter().map(|r| r.decision_change)),
            p_off_on: Stat::of(rows.iter().filter_map(|r| r.p_off_on)),
            p_on_off: Stat::of(rows.iter().filter_map(|r| r.p_on_off)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub seed: u64,
    pub solver: String,
    pub estimator: String,
    pub iterations: usize,
    pub slots: usize,
    pub rows: usize,
    pub zero_load_skipped: usize,
    pub mlc_fallbacks: usize,
    pub stats: RowStats,
    /// Mean relative error after each MLC layer; empty for other estimators.
    pub layer_mean_eps: Vec<Option<f64>>,
    pub config: String,
}

impl<T: Scalar> ExperimentReport<T> {
    pub fn records(&self) -> Vec<RowRecord> {
        self.rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                RowRecord {
                    iteration: r.iteration,
                    slot: r.slot,
                    mean_eps: m.estimation_error.map(Scalar::as_f64),
                    power_true_w: m.power_true.as_f64(),
                    power_est_w: m.power_est.as_f64(),
                    decision_change: m.decision_change_rate.as_f64(),
                    p_off_on: m.p_err.off_to_on.map(Scalar::as_f64),
                    p_on_off: m.p_err.on_to_off.map(Scalar::as_f64),
                }
            })
            .collect()
    }

    pub fn summary(&self) -> Summary {
        Summary {
            version: self.version.clone(),
            seed: self.seed,
            solver: self.solver.name().to_string(),
            estimator: self.estimator.name().to_string(),
            iterations: self.iterations,
            slots: self.slots,
            rows: self.rows.len(),
            zero_load_skipped: self.zero_load_skipped(),
            mlc_fallbacks: self.mlc_fallbacks,
            stats: RowStats::of(&self.records()),
            layer_mean_eps: self
                .layer_errors
                .iter()
                .map(|a| a.mean().map(Scalar::as_f64))
                .collect(),
            config: self.config_echo.clone(),
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

/// Header plus one line per record; an empty slice gives a header-only file.
pub fn write_rows_csv(path: &Path, rows: &[RowRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ROW_HEADER).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<RowRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Files written by [`emit_report`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
    pub layers: Option<PathBuf>,
}

/// Writes the row CSV, the JSON summary, the config echo and, for MLC, the
/// error-per-layer series into `dir`.
pub fn emit_report<T: Scalar>(report: &ExperimentReport<T>, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        rows: dir.join(ROWS_FILE),
        summary: dir.join(SUMMARY_FILE),
        config: dir.join(CONFIG_FILE),
        layers: (!report.layer_errors.is_empty()).then(|| dir.join(LAYERS_FILE)),
    };
    write_rows_csv(&files.rows, &report.records())?;

    let mut json = serde_json::to_string_pretty(&report.summary()).expect("summary serializes");
    json.push('\n');
    fs::write(&files.summary, json).map_err(|e| Error::io(&files.summary, e))?;
    fs::write(&files.config, &report.config_echo).map_err(|e| Error::io(&files.config, e))?;

    if let Some(path) = &files.layers {
        let mut w = csv_writer(path)?;
        w.write_record(["layer", "mean_eps", "samples"])
            .map_err(|e| csv_error(path, e))?;
        for (layer, acc) in report.layer_errors.iter().enumerate() {
            let mean = acc
                .mean()
                .map(|m| m.as_f64().to_string())
                .unwrap_or_default();
            w.write_record([(layer + 1).to_string(), mean, acc.count().to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}
