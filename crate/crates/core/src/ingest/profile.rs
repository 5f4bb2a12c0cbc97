use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cdr::CdrRecord;
use crate::error::{Error, Result};
use crate::scalar::{Point, Scalar};

pub const SLOTS_PER_DAY: usize = 144;
pub const MS_PER_SLOT: u64 = 600_000;
pub const MS_PER_DAY: u64 = 86_400_000;
pub const DEFAULT_CELL_SIZE_M: f64 = 235.0;

/// Normalized daily load series of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile<T> {
    pub cell_id: u32,
    pub position: Point<T>,
    slots: Vec<T>,
}

impl<T: Scalar> TrafficProfile<T> {
    pub fn new(cell_id: u32, position: Point<T>, slots: Vec<T>) -> Result<Self> {
        if slots.len() != SLOTS_PER_DAY {
            return Err(Error::InvalidArgument(format!(
                "cell {cell_id}: profile has {} slots, expected {SLOTS_PER_DAY}",
                slots.len()
            )));
        }
        if let Some(bad) = slots
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Domain(format!(
                "cell {cell_id}: load {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            cell_id,
            position,
            slots,
        })
    }

    pub fn slots(&self) -> &[T] {
        &self.slots
    }

    pub fn load(&self, slot: usize) -> T {
        self.slots[slot]
    }
}

/// Square-grid geometry: row-major ids starting at 1, centroids in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry<T> {
    pub grid_side: u32,
    pub cell_size: T,
}

impl<T: Scalar> GridGeometry<T> {
    pub fn new(grid_side: u32, cell_size: T) -> Result<Self> {
        if grid_side == 0 {
            return Err(Error::InvalidArgument("grid_side must be positive".into()));
        }
        if !(cell_size > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        Ok(Self {
            grid_side,
            cell_size,
        })
    }

    pub fn square_count(&self) -> u32 {
        self.grid_side * self.grid_side
    }

    pub fn centroid(&self, square_id: u32) -> Result<Point<T>> {
        grid_centroid(square_id, self.grid_side, self.cell_size)
    }
}

pub fn grid_centroid<T: Scalar>(square_id: u32, grid_side: u32, cell_size: T) -> Result<Point<T>> {
    let count = u64::from(grid_side) * u64::from(grid_side);
    if square_id == 0 || u64::from(square_id) > count {
        return Err(Error::InvalidArgument(format!(
            "square_id {square_id} outside 1..={count}"
        )));
    }
    if !(cell_size > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    let idx = square_id - 1;
    let row = T::from_u32(idx / grid_side).unwrap();
    let col = T::from_u32(idx % grid_side).unwrap();
    let half = T::lit(0.5);
    Ok(Point::new(
        (col + half) * cell_size,
        (row + half) * cell_size,
    ))
}

/// Activity totals keyed by `(square_id, slot_of_day)`.
///
/// Shard-local aggregates can be combined with [`ActivityAggregate::merge`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActivityAggregate<T> {
    totals: BTreeMap<(u32, u16), T>,
    days: BTreeSet<u64>,
}

impl<T: Scalar> ActivityAggregate<T> {
    pub fn new() -> Self {
        Self {
            totals: BTreeMap::new(),
            days: BTreeSet::new(),
        }
    }

    pub fn add(&mut self, record: &CdrRecord<T>) {
        let slot = ((record.time_interval % MS_PER_DAY) / MS_PER_SLOT) as u16;
        *self
            .totals
            .entry((record.square_id, slot))
            .or_insert_with(T::zero) += record.total_activity();
        self.days.insert(record.time_interval / MS_PER_DAY);
    }

    pub fn merge(&mut self, other: ActivityAggregate<T>) {
        for (key, value) in other.totals {
            *self.totals.entry(key).or_insert_with(T::zero) += value;
        }
        self.days.extend(other.days);
    }

    pub fn get(&self, square_id: u32, slot: usize) -> Option<T> {
        self.totals.get(&(square_id, slot as u16)).copied()
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    /// Number of distinct calendar days (UTC) seen in the records.
    pub fn days_observed(&self) -> usize {
        self.days.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, usize), T)> + '_ {
        self.totals
            .iter()
            .map(|(&(sq, slot), &v)| ((sq, slot as usize), v))
    }
}

impl<T: Scalar> Extend<CdrRecord<T>> for ActivityAggregate<T> {
    fn extend<I: IntoIterator<Item = CdrRecord<T>>>(&mut self, iter: I) {
        for rec in iter {
            self.add(&rec);
        }
    }
}

pub fn aggregate_records<T: Scalar>(
    records: impl IntoIterator<Item = CdrRecord<T>>,
) -> ActivityAggregate<T> {
    let mut agg = ActivityAggregate::new();
    agg.extend(records);
    agg
}

/// Mean activity per slot of day for squares `1..=square_count`. Squares or
/// slots without records are zero.
pub fn build_daily_profile<T: Scalar>(
    aggregates: &ActivityAggregate<T>,
    day_count: usize,
    square_count: u32,
) -> Result<BTreeMap<u32, Vec<T>>> {
    if day_count == 0 {
        return Err(Error::InvalidArgument(
            "day_count must be at least 1".into(),
        ));
    }
    let days = T::from_usize_lossy(day_count);
    let mut out: BTreeMap<u32, Vec<T>> = (1..=square_count)
        .map(|sq| (sq, vec![T::zero(); SLOTS_PER_DAY]))
        .collect();
    for ((square, slot), total) in aggregates.iter() {
        let profile = out.get_mut(&square).ok_or_else(|| {
            Error::InvalidArgument(format!("square {square} outside 1..={square_count}"))
        })?;
        profile[slot] = total / days;
    }
    Ok(out)
}

/// Divides every value by the corpus-wide maximum.
pub fn normalize_series<T: Scalar>(raw: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let max = raw
        .iter()
        .flatten()
        .copied()
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc });
    if !(max > T::zero()) || !max.is_finite() {
        return Err(Error::Normalization(
            "corpus has no strictly positive activity".into(),
        ));
    }
    if let Some(bad) = raw.iter().flatten().find(|v| !(**v >= T::zero())) {
        return Err(Error::Domain(format!("negative or NaN activity {bad}")));
    }
    Ok(raw
        .iter()
        .map(|series| {
            series
                .iter()
                .map(|&v| if v == max { T::one() } else { v / max })
                .collect()
        })
        .collect())
}

pub fn normalize_profiles<T: Scalar>(
    raw: &BTreeMap<u32, Vec<T>>,
    geometry: &GridGeometry<T>,
) -> Result<Vec<TrafficProfile<T>>> {
    let series: Vec<Vec<T>> = raw.values().cloned().collect();
    let normalized = normalize_series(&series)?;
    raw.keys()
        .zip(normalized)
        .map(|(&id, slots)| TrafficProfile::new(id, geometry.centroid(id)?, slots))
        .collect()
}

/// Writes profiles as `cell_id,x_m,y_m,s0..s143`.
pub fn write_profiles_csv<T: Scalar>(path: &Path, profiles: &[TrafficProfile<T>]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    let mut header = vec!["cell_id".to_string(), "x_m".into(), "y_m".into()];
    header.extend((0..SLOTS_PER_DAY).map(|s| format!("s{s}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for p in profiles {
        let mut row = vec![
            p.cell_id.to_string(),
            p.position.x.to_string(),
            p.position.y.to_string(),
        ];
        row.extend(p.slots.iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_profiles_csv<T: Scalar>(path: &Path) -> Result<Vec<TrafficProfile<T>>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut out = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let num = |i: usize| -> Result<T> {
            row.get(i)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("column {i}: expected a number"),
                })
        };
        let cell_id: u32 = row
            .get(0)
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line,
                message: "cell_id: expected an integer".into(),
            })?;
        let position = Point::new(num(1)?, num(2)?);
        let slots = (0..SLOTS_PER_DAY)
            .map(|s| num(3 + s))
            .collect::<Result<Vec<_>>>()?;
        out.push(TrafficProfile::new(cell_id, position, slots)?);
    }
    Ok(out)
}
