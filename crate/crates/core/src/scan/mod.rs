//! Synthetic detector scans and their reduction.
//!
//! A scan records counts at uniformly stepped grating positions. Signal scans
//! alternate with background scans; each signal scan is paired with the
//! background scan that follows it.

mod io;
mod reduce;
mod synth;

pub use io::{format_scan, parse_scan, read_ensemble, read_scan, write_ensemble, write_scan};
pub use reduce::{
    align_and_average, candidate_frequencies, fit_scan, noise_floor, pooled_noise, rank_and_select,
    reduce_records, shared_period, visibility_vs_r, Aligned, NoiseFloor, RPoint, Reduction,
    ScanFit,
};
pub use synth::{generate_scan_ensemble, DriftModel};

use crate::error::{domain, Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanKind {
    Signal,
    Background,
}

impl ScanKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ScanKind::Signal => "signal",
            ScanKind::Background => "background",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "signal" => Some(ScanKind::Signal),
            "background" => Some(ScanKind::Background),
            _ => None,
        }
    }
}

/// Raw counts of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord<T> {
    /// m, uniform step.
    pub positions: Vec<T>,
    pub counts: Vec<u64>,
    /// s per position.
    pub dwell: T,
    pub kind: ScanKind,
    pub timestamp_index: usize,
    pub seed: u64,
}

impl<T: Real> ScanRecord<T> {
    pub fn step(&self) -> T {
        if self.positions.len() < 2 {
            return T::zero();
        }
        self.positions[1] - self.positions[0]
    }

    pub fn validate(&self) -> Result<()> {
        check_grid(&self.positions)?;
        if self.counts.len() != self.positions.len() {
            return Err(domain("counts and positions differ in length"));
        }
        if !(self.dwell > T::zero()) {
            return Err(domain(format!(
                "dwell must be positive, got {}",
                self.dwell
            )));
        }
        Ok(())
    }
}

/// Count rates after background subtraction.
#[derive(Debug, Clone, PartialEq)]
pub struct RateScan<T> {
    pub positions: Vec<T>,
    /// counts/s, may be negative.
    pub rates: Vec<T>,
    pub timestamp_index: usize,
}

impl<T: Real> RateScan<T> {
    pub fn step(&self) -> T {
        if self.positions.len() < 2 {
            return T::zero();
        }
        self.positions[1] - self.positions[0]
    }

    /// Length covered, `n · step`.
    pub fn span(&self) -> T {
        self.step() * T::of_usize(self.positions.len())
    }

    /// Same grid, no background.
    pub fn from_record(record: &ScanRecord<T>) -> Self {
        Self {
            positions: record.positions.clone(),
            rates: record
                .counts
                .iter()
                .map(|&c| T::of(c as f64) / record.dwell)
                .collect(),
            timestamp_index: record.timestamp_index,
        }
    }
}

fn check_grid<T: Real>(positions: &[T]) -> Result<()> {
    if positions.len() < 3 {
        return Err(domain("a scan needs at least three positions"));
    }
    let step = positions[1] - positions[0];
    if !(step > T::zero()) {
        return Err(domain("scan positions must increase"));
    }
    let tol = step * T::of(1e-6);
    for (j, &p) in positions.iter().enumerate() {
        let expected = positions[0] + step * T::of_usize(j);
        if (p - expected).abs() > tol {
            return Err(domain(format!(
                "scan positions are not uniformly stepped at index {j}"
            )));
        }
    }
    Ok(())
}

fn same_grid<T: Real>(a: &[T], b: &[T]) -> bool {
    if a.len() != b.len() || a.len() < 2 {
        return false;
    }
    let tol = (a[1] - a[0]).abs() * T::of(1e-9);
    a.iter().zip(b).all(|(&x, &y)| (x - y).abs() <= tol)
}

/// Per-position rate difference `signal − background`.
pub fn subtract_background<T: Real>(
    signal: &ScanRecord<T>,
    background: &ScanRecord<T>,
) -> Result<RateScan<T>> {
    signal.validate()?;
    background.validate()?;
    if !same_grid(&signal.positions, &background.positions) {
        return Err(Error::Pairing(format!(
            "scan {} and background {} have different position grids",
            signal.timestamp_index, background.timestamp_index
        )));
    }
    let rates = signal
        .counts
        .iter()
        .zip(&background.counts)
        .map(|(&s, &b)| T::of(s as f64) / signal.dwell - T::of(b as f64) / background.dwell)
        .collect();
    Ok(RateScan {
        positions: signal.positions.clone(),
        rates,
        timestamp_index: signal.timestamp_index,
    })
}

/// Pairs every signal scan with the background scan recorded right after it.
pub fn pair_records<T: Real>(records: &[ScanRecord<T>]) -> Result<Vec<RateScan<T>>> {
    let mut ordered: Vec<&ScanRecord<T>> = records.iter().collect();
    ordered.sort_by_key(|r| r.timestamp_index);
    let mut out = Vec::new();
    let mut i = 0;
    while i < ordered.len() {
        let r = ordered[i];
        match r.kind {
            ScanKind::Signal => {
                let bg = ordered
                    .get(i + 1)
                    .filter(|b| b.kind == ScanKind::Background)
                    .ok_or_else(|| {
                        Error::Pairing(format!(
                            "signal scan {} has no following background scan",
                            r.timestamp_index
                        ))
                    })?;
                out.push(subtract_background(r, bg)?);
                i += 2;
            }
            ScanKind::Background => {
                return Err(Error::Pairing(format!(
                    "background scan {} does not follow a signal scan",
                    r.timestamp_index
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Pairing("no signal scans".into()));
    }
    Ok(out)
}
