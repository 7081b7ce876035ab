//! One scan per text file:
//!
//! ```text
//! # step_m=4e-8 dwell_s=3.5 kind=signal index=0 seed=42
//! 0,118
//! 0.00000004,131
//! ```
//!
//! Further `#` lines after the header are comments.

use std::fs;
use std::path::{Path, PathBuf};

use super::{ScanKind, ScanRecord};
use crate::error::{Error, Result};
use crate::num::Real;

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn format_scan<T: Real>(record: &ScanRecord<T>) -> String {
    let mut out = format!(
        "# step_m={} dwell_s={} kind={} index={} seed={}\n",
        record.step(),
        record.dwell,
        record.kind.tag(),
        record.timestamp_index,
        record.seed
    );
    for (p, c) in record.positions.iter().zip(&record.counts) {
        out.push_str(&format!("{p},{c}\n"));
    }
    out
}

pub fn parse_scan<T: Real>(text: &str) -> Result<ScanRecord<T>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty scan file"))?;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| parse_error(1, "missing '#' header line"))?;
    let (mut step, mut dwell, mut kind, mut index, mut seed) = (None, None, None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_error(1, format!("malformed header field '{field}'")))?;
        let bad = |what: &str| parse_error(1, format!("invalid {what} '{value}'"));
        match key {
            "step_m" => step = Some(value.parse::<T>().map_err(|_| bad("step_m"))?),
            "dwell_s" => dwell = Some(value.parse::<T>().map_err(|_| bad("dwell_s"))?),
            "kind" => kind = Some(ScanKind::from_tag(value).ok_or_else(|| bad("kind"))?),
            "index" => index = Some(value.parse::<usize>().map_err(|_| bad("index"))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
            _ => return Err(parse_error(1, format!("unknown header field '{key}'"))),
        }
    }
    let missing = |k: &str| parse_error(1, format!("header lacks {k}"));
    let step: T = step.ok_or_else(|| missing("step_m"))?;
    let mut record = ScanRecord {
        positions: Vec::new(),
        counts: Vec::new(),
        dwell: dwell.ok_or_else(|| missing("dwell_s"))?,
        kind: kind.ok_or_else(|| missing("kind"))?,
        timestamp_index: index.ok_or_else(|| missing("index"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
    };
    for (i, line) in lines {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (p, c) = line
            .split_once(',')
            .ok_or_else(|| parse_error(n, "expected 'position_m,counts'"))?;
        record.positions.push(
            p.trim()
                .parse::<T>()
                .map_err(|_| parse_error(n, format!("invalid position '{p}'")))?,
        );
        record.counts.push(
            c.trim()
                .parse::<u64>()
                .map_err(|_| parse_error(n, format!("invalid count '{c}'")))?,
        );
    }
    record
        .validate()
        .map_err(|e| parse_error(0, e.to_string()))?;
    if (record.step() - step).abs() > step.abs() * T::of(1e-6) {
        return Err(parse_error(1, "header step_m disagrees with the positions"));
    }
    Ok(record)
}

pub fn write_scan<T: Real>(path: &Path, record: &ScanRecord<T>) -> Result<()> {
    fs::write(path, format_scan(record))?;
    Ok(())
}

pub fn read_scan<T: Real>(path: &Path) -> Result<ScanRecord<T>> {
    parse_scan(&fs::read_to_string(path)?)
}

fn scan_file_name(index: usize) -> String {
    format!("scan_{index:04}.csv")
}

/// Writes `scan_NNNN.csv` files into `dir`, creating it if needed.
pub fn write_ensemble<T: Real>(dir: &Path, records: &[ScanRecord<T>]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    records
        .iter()
        .map(|r| {
            let path = dir.join(scan_file_name(r.timestamp_index));
            write_scan(&path, r)?;
            Ok(path)
        })
        .collect()
}

/// Reads every `.csv` file in `dir`, ordered by timestamp index.
pub fn read_ensemble<T: Real>(dir: &Path) -> Result<Vec<ScanRecord<T>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut records = paths
        .iter()
        .map(|p| {
            read_scan(p).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<ScanRecord<T>>>>()?;
    records.sort_by_key(|r| r.timestamp_index);
    Ok(records)
}
