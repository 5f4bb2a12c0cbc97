use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{parse_config, ExperimentConfig};
use super::report::{RowStats, Summary};
use super::runner::{run_on_corpus, Corpus};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One `--vary key=v1,v2,...` axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    pub fn parse(raw: &str) -> Result<Self> {
        let (key, values) = raw.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("expected key=v1,v2,..., got {raw:?}"))
        })?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "expected key=v1,v2,..., got {raw:?}"
            )));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Result at one value of the innermost axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub summary: Summary,
}

/// Points sharing the values of every outer axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSeries {
    /// `(key, value)` of each outer axis, outermost first.
    pub fixed: Vec<(String, String)>,
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

impl SweepSeries {
    pub fn file_name(&self) -> String {
        if self.fixed.is_empty() {
            return "series.csv".to_string();
        }
        let label: Vec<String> = self.fixed.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let clean: String = label
            .join("_")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '=') {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!("series_{clean}.csv")
    }
}

/// Runs the base config at every combination of axis values. The last axis
/// is the x-axis of each series; the earlier axes select the series.
pub fn run_sweep<T: Scalar>(
    base: &str,
    overrides: &[(String, String)],
    axes: &[SweepAxis],
) -> Result<Vec<SweepSeries>> {
    let (inner, outer) = axes
        .split_last()
        .ok_or_else(|| Error::InvalidArgument("a sweep needs at least one axis".into()))?;
    let mut corpora: HashMap<String, Corpus<T>> = HashMap::new();
    let mut series = Vec::new();
    for fixed in combinations(outer) {
        let mut points = Vec::with_capacity(inner.values.len());
        for value in &inner.values {
            let mut ov = overrides.to_vec();
            ov.extend(fixed.iter().cloned());
            ov.push((inner.key.clone(), value.clone()));
            let cfg = parse_config(base, &ov)?;
            let key = corpus_key(&cfg);
            if !corpora.contains_key(&key) {
                corpora.insert(key.clone(), Corpus::load(&cfg)?);
            }
            let report = run_on_corpus::<T>(&cfg, &corpora[&key])?;
            points.push(SweepPoint {
                value: value.clone(),
                summary: report.summary(),
            });
        }
        series.push(SweepSeries {
            fixed,
            axis: inner.key.clone(),
            points,
        });
    }
    Ok(series)
}

fn corpus_key(cfg: &ExperimentConfig) -> String {
    let dataset = cfg
        .dataset
        .as_ref()
        .map(|d| toml::to_string(d).expect("dataset serializes"));
    let synth = cfg
        .synth
        .as_ref()
        .map(|s| toml::to_string(s).expect("synth serializes"));
    format!("{dataset:?}|{synth:?}")
}

fn combinations(axes: &[SweepAxis]) -> Vec<Vec<(String, String)>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((axis.key.clone(), v.clone()));
                    next
                })
            })
            .collect()
    })
}

const SERIES_STATS: [&str; 11] = [
    "mean_eps",
    "std_eps",
    "power_true_w",
    "power_est_w",
    "power_gap",
    "std_power_gap",
    "decision_change",
    "std_decision_change",
    "p_off_on",
    "p_on_off",
    "rows",
];

fn series_row(value: &str, summary: &Summary) -> Vec<String> {
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let s: &RowStats = &summary.stats;
    let mut row = vec![value.to_string(), summary.solver.clone()];
    row.extend([
        f(s.mean_eps.mean),
        f(s.mean_eps.std),
        f(s.power_true_w.mean),
        f(s.power_est_w.mean),
        f(s.power_gap.mean),
        f(s.power_gap.std),
        f(s.decision_change.mean),
        f(s.decision_change.std),
        f(s.p_off_on.mean),
        f(s.p_on_off.mean),
        summary.rows.to_string(),
    ]);
    row
}

/// Writes one CSV per series into `dir`, returning their paths in order.
pub fn write_sweep(series: &[SweepSeries], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(series.len());
    for s in series {
        let path = dir.join(s.file_name());
        let err = |e: csv::Error| Error::io(&path, std::io::Error::other(e));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(err)?;
        let mut header = vec![s.axis.clone(), "solver".to_string()];
        header.extend(SERIES_STATS.iter().map(|h| h.to_string()));
        w.write_record(&header).map_err(err)?;
        for p in &s.points {
            w.write_record(series_row(&p.value, &p.summary))
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
