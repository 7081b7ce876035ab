use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use super::{ScanKind, ScanRecord};
use crate::engine::FringePattern;
use crate::error::{domain, Result};
use crate::num::{mix_seed, Real};

/// Instrument imperfections of a scan series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftModel<T> {
    /// Random grating displacement between consecutive scans, m (cumulative).
    pub per_scan_shift_sigma: T,
    /// Rms random-walk displacement accumulated over one scan, m.
    pub within_scan_drift: T,
    /// Background rate of the first and last scan, counts/s; linear in between.
    pub background_rate_start: T,
    pub background_rate_end: T,
    /// Multiplicative background fluctuation per position at the reference dwell.
    pub background_noise_fraction: T,
    /// Dwell at which the background fluctuation equals its nominal fraction, s.
    pub noise_reference_time: T,
    /// Gaussian blur of the grating position during a scan, m.
    pub jitter_sigma: T,
}

impl<T: Real> DriftModel<T> {
    /// No drift, no background.
    pub fn none() -> Self {
        Self {
            per_scan_shift_sigma: T::zero(),
            within_scan_drift: T::zero(),
            background_rate_start: T::zero(),
            background_rate_end: T::zero(),
            background_noise_fraction: T::zero(),
            noise_reference_time: T::one(),
            jitter_sigma: T::zero(),
        }
    }

    /// 70 → 130 cps background with 30 % noise and the given drift.
    pub fn c60f48_like(per_scan_shift_sigma: T, within_scan_drift: T) -> Self {
        Self {
            per_scan_shift_sigma,
            within_scan_drift,
            background_rate_start: T::of(70.0),
            background_rate_end: T::of(130.0),
            background_noise_fraction: T::of(0.3),
            noise_reference_time: T::one(),
            jitter_sigma: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.per_scan_shift_sigma,
            self.within_scan_drift,
            self.background_rate_start,
            self.background_rate_end,
            self.background_noise_fraction,
            self.jitter_sigma,
        ];
        if fields.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(domain(
                "drift model parameters must be finite and non-negative",
            ));
        }
        if !(self.noise_reference_time > T::zero()) {
            return Err(domain("noise reference time must be positive"));
        }
        Ok(())
    }

    fn background_rate(&self, index: usize, n_scans: usize) -> f64 {
        let t = if n_scans > 1 {
            index as f64 / (n_scans - 1) as f64
        } else {
            0.0
        };
        let (a, b) = (
            self.background_rate_start.as_f64(),
            self.background_rate_end.as_f64(),
        );
        a + (b - a) * t
    }
}

/// Alternating signal and background scans of a fringe pattern.
///
/// Signal rates are `rate_scale · S(s + offset)/S_0` on top of the background.
/// The grating offset takes a Gaussian jump before every scan and wanders as a
/// random walk during it. Every scan draws from its own generator seeded with
/// `mix_seed(seed, index)`.
#[allow(clippy::too_many_arguments)]
pub fn generate_scan_ensemble<T: Real>(
    truth: &FringePattern<T>,
    rate_scale: T,
    drift: &DriftModel<T>,
    n_scans: usize,
    step: T,
    span: T,
    dwell: T,
    seed: u64,
) -> Result<Vec<ScanRecord<T>>> {
    drift.validate()?;
    if !(step > T::zero()) || !(dwell > T::zero()) || !(rate_scale >= T::zero()) {
        return Err(domain(
            "step and dwell must be positive and the rate scale non-negative",
        ));
    }
    if !(span >= T::of(2.0) * truth.period) {
        return Err(domain(format!(
            "span {span} m covers fewer than two periods of {} m",
            truth.period
        )));
    }
    if n_scans == 0 {
        return Err(domain("n_scans must be positive"));
    }
    let s0 = truth.mean();
    if !(s0 > T::zero()) {
        return Err(domain("truth pattern has no flux"));
    }
    let n_pos = (span / step).round().as_f64() as usize;
    if n_pos < 3 {
        return Err(domain("scan needs at least three positions"));
    }
    let step_f = step.as_f64();
    let g = truth.period.as_f64();
    let blur = drift.jitter_sigma.as_f64();
    // normalised truth with the jitter blur folded into its harmonics
    let harmonics: Vec<(f64, f64, f64)> = (1..=truth.m_max)
        .map(|m| {
            let h = truth.harmonic(m as isize);
            let damp = (-2.0 * (std::f64::consts::PI * m as f64 * blur / g).powi(2)).exp();
            let scale = 2.0 * damp / s0.as_f64();
            (m as f64, h.re.as_f64() * scale, h.im.as_f64() * scale)
        })
        .collect();
    let shape = |s: f64| -> f64 {
        let base = std::f64::consts::TAU * s / g;
        let v = 1.0
            + harmonics
                .iter()
                .map(|&(m, re, im)| re * (m * base).cos() - im * (m * base).sin())
                .sum::<f64>();
        v.max(0.0)
    };

    let seeds: Vec<u64> = (0..n_scans).map(|k| mix_seed(seed, k as u64)).collect();
    let jump =
        Normal::new(0.0, drift.per_scan_shift_sigma.as_f64()).map_err(|e| domain(e.to_string()))?;
    let mut offsets = Vec::with_capacity(n_scans);
    let mut acc = 0.0;
    for &s in &seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        acc += jump.sample(&mut rng);
        offsets.push(acc);
    }

    let walk = Normal::new(
        0.0,
        drift.within_scan_drift.as_f64() / (n_pos as f64).sqrt(),
    )
    .map_err(|e| domain(e.to_string()))?;
    let dwell_f = dwell.as_f64();
    let noise_sigma = drift.background_noise_fraction.as_f64()
        * (drift.noise_reference_time.as_f64() / dwell_f).sqrt();
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| domain(e.to_string()))?;
    let scale = rate_scale.as_f64();

    let records = (0..n_scans)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds[k]);
            let _ = jump.sample(&mut rng);
            let kind = if k % 2 == 0 {
                ScanKind::Signal
            } else {
                ScanKind::Background
            };
            let bg = drift.background_rate(k, n_scans);
            let mut wander = 0.0;
            let counts = (0..n_pos)
                .map(|j| {
                    wander += walk.sample(&mut rng);
                    let background = bg * (1.0 + noise.sample(&mut rng)).max(0.0);
                    let rate = match kind {
                        ScanKind::Signal => {
                            scale * shape(j as f64 * step_f + offsets[k] + wander) + background
                        }
                        ScanKind::Background => background,
                    };
                    poisson(rate * dwell_f, &mut rng)
                })
                .collect();
            ScanRecord {
                positions: (0..n_pos).map(|j| step * T::of_usize(j)).collect(),
                counts,
                dwell,
                kind,
                timestamp_index: k,
                seed: seeds[k],
            }
        })
        .collect();
    Ok(records)
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|d| d.sample(rng) as u64)
        .unwrap_or(0)
}
