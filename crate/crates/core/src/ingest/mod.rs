//! Call-detail-record ingestion, per-grid daily profiles and the synthetic
//! traffic generator used when the real dataset is not available.

mod cdr;
mod profile;
mod synth;

pub use cdr::{parse_cdr_line, read_cdr_dir, read_cdr_file, CdrRecord};
pub use profile::{
    aggregate_records, build_daily_profile, grid_centroid, normalize_profiles, normalize_series,
    read_profiles_csv, write_profiles_csv, ActivityAggregate, GridGeometry, TrafficProfile,
    DEFAULT_CELL_SIZE_M, MS_PER_DAY, MS_PER_SLOT, SLOTS_PER_DAY,
};
pub use synth::{default_diurnal_profile, synth_traffic, SynthParams};

use std::path::Path;

use rayon::prelude::*;

use crate::error::Result;
use crate::scalar::Scalar;

/// Reads every CDR file of `dir`, averages activity per slot of day over
/// `day_count` days (default: the days present) and normalizes the corpus.
pub fn profiles_from_cdr_dir<T: Scalar>(
    dir: &Path,
    geometry: &GridGeometry<T>,
    day_count: Option<usize>,
) -> Result<Vec<TrafficProfile<T>>> {
    let files = read_cdr_dir(dir)?;
    let per_file: Vec<ActivityAggregate<T>> = files
        .par_iter()
        .map(|f| read_cdr_file(f).map(aggregate_records))
        .collect::<Result<_>>()?;
    let mut agg = ActivityAggregate::new();
    for a in per_file {
        agg.merge(a);
    }
    let days = day_count.unwrap_or_else(|| agg.days_observed().max(1));
    let raw = build_daily_profile(&agg, days, geometry.square_count())?;
    normalize_profiles(&raw, geometry)
}
