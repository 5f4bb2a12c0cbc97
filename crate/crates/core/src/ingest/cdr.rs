use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::profile::MS_PER_SLOT;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Highest square id in the Milan grid.
const MAX_SQUARE_ID: u32 = 10_000;

/// One row of the Telecom Italia activity files.
#[derive(Clone, Debug, PartialEq)]
pub struct CdrRecord<T> {
    pub square_id: u32,
    /// Epoch milliseconds, aligned to a 10-minute bucket.
    pub time_interval: u64,
    pub country_code: i64,
    pub sms_in: T,
    pub sms_out: T,
    pub call_in: T,
    pub call_out: T,
    pub internet: T,
}

impl<T: Scalar> CdrRecord<T> {
    /// Unweighted sum of the five activity columns.
    pub fn total_activity(&self) -> T {
        self.sms_in + self.sms_out + self.call_in + self.call_out + self.internet
    }
}

impl<T: Scalar> fmt::Display for CdrRecord<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.square_id,
            self.time_interval,
            self.country_code,
            self.sms_in,
            self.sms_out,
            self.call_in,
            self.call_out,
            self.internet
        )
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_activity<T: Scalar>(field: Option<&str>, name: &str, line: usize) -> Result<T> {
    let field = match field.map(str::trim) {
        None | Some("") => return Ok(T::zero()),
        Some(f) => f,
    };
    let value: T = field
        .parse()
        .map_err(|_| parse_err(line, format!("{name}: not a number: {field:?}")))?;
    if !value.is_finite() || value < T::zero() {
        return Err(parse_err(
            line,
            format!("{name}: expected a non-negative value, got {field:?}"),
        ));
    }
    Ok(value)
}

/// Parses one tab-separated CDR line. `line_no` is only used for error reporting.
pub fn parse_cdr_line<T: Scalar>(line: &str, line_no: usize) -> Result<CdrRecord<T>> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split('\t').collect();
    if !(3..=8).contains(&fields.len()) {
        return Err(parse_err(
            line_no,
            format!("expected 3 to 8 tab-separated fields, got {}", fields.len()),
        ));
    }

    let square_id: u32 = fields[0].trim().parse().map_err(|_| {
        parse_err(
            line_no,
            format!("square_id: not an integer: {:?}", fields[0]),
        )
    })?;
    if !(1..=MAX_SQUARE_ID).contains(&square_id) {
        return Err(parse_err(
            line_no,
            format!("square_id {square_id} outside 1..={MAX_SQUARE_ID}"),
        ));
    }
    let time_interval: u64 = fields[1].trim().parse().map_err(|_| {
        parse_err(
            line_no,
            format!("time_interval: not an integer: {:?}", fields[1]),
        )
    })?;
    if !time_interval.is_multiple_of(MS_PER_SLOT) {
        return Err(parse_err(
            line_no,
            format!("time_interval {time_interval} is not a multiple of {MS_PER_SLOT} ms"),
        ));
    }
    let country_code: i64 = fields[2].trim().parse().map_err(|_| {
        parse_err(
            line_no,
            format!("country_code: not an integer: {:?}", fields[2]),
        )
    })?;

    let get = |i: usize| fields.get(i).copied();
    Ok(CdrRecord {
        square_id,
        time_interval,
        country_code,
        sms_in: parse_activity(get(3), "sms_in", line_no)?,
        sms_out: parse_activity(get(4), "sms_out", line_no)?,
        call_in: parse_activity(get(5), "call_in", line_no)?,
        call_out: parse_activity(get(6), "call_out", line_no)?,
        internet: parse_activity(get(7), "internet", line_no)?,
    })
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

/// Reads every record of one file, gzip-compressed when the name ends in `.gz`.
/// Blank lines are skipped.
pub fn read_cdr_file<T: Scalar>(path: &Path) -> Result<Vec<CdrRecord<T>>> {
    let reader = BufReader::new(open_maybe_gz(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_cdr_line(&line, idx + 1).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?);
    }
    Ok(out)
}

/// Lists the `.txt`, `.tsv` and `.gz` files of a dataset directory in name order.
pub fn read_cdr_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e, "txt" | "tsv" | "gz"))
        })
        .collect();
    files.sort();
    Ok(files)
}
