use num_complex::Complex;
use rayon::prelude::*;

use super::{
    quantum_pattern_coefficients, visibility, EngineSettings, FringePattern, VisibilityMode,
};
use crate::error::{domain, Error, Result};
use crate::kinematics::InterferometerConfig;
use crate::num::{pairwise_sum, Real};

/// Discrete speed distribution of the detected flux.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityDistribution<T> {
    /// m/s, strictly increasing.
    pub grid: Vec<T>,
    /// Non-negative, summing to one.
    pub weights: Vec<T>,
    pub mean: T,
    /// FWHM divided by the mean.
    pub fwhm_fraction: T,
}

impl<T: Real> VelocityDistribution<T> {
    /// Normalises `weights` and measures mean and FWHM from the grid.
    pub fn new(grid: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if grid.is_empty() || grid.len() != weights.len() {
            return Err(domain(
                "velocity grid and weights must be non-empty and of equal length",
            ));
        }
        if grid.iter().any(|&v| !(v > T::zero())) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain(
                "velocity grid must be positive and strictly increasing",
            ));
        }
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(domain("velocity weights must be finite and non-negative"));
        }
        let total = pairwise_sum(&weights);
        if !(total > T::zero()) {
            return Err(domain("velocity weights sum to zero"));
        }
        let weights: Vec<T> = weights.iter().map(|&w| w / total).collect();
        let mean = weighted_mean(&grid, &weights);
        let fwhm_fraction = measured_fwhm(&grid, &weights) / mean;
        Ok(Self {
            grid,
            weights,
            mean,
            fwhm_fraction,
        })
    }

    /// A single speed.
    pub fn delta(v: T) -> Result<Self> {
        Self::new(vec![v], vec![T::one()])
    }

    /// Gaussian of the given FWHM fraction, truncated at ±3σ on `points` nodes.
    pub fn gaussian(mean: T, fwhm_fraction: T, points: usize) -> Result<Self> {
        if !(mean > T::zero()) || !(fwhm_fraction >= T::zero()) {
            return Err(domain(
                "gaussian needs a positive mean and non-negative width",
            ));
        }
        if fwhm_fraction == T::zero() || points < 2 {
            return Self::delta(mean);
        }
        let sigma = fwhm_fraction * mean / T::of(2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        if mean - T::of(3.0) * sigma <= T::zero() {
            return Err(domain("gaussian is too wide: ±3σ reaches zero speed"));
        }
        let grid: Vec<T> = (0..points)
            .map(|i| {
                let u = T::of(-3.0 + 6.0 * i as f64 / (points - 1) as f64);
                mean + u * sigma
            })
            .collect();
        let weights: Vec<T> = grid
            .iter()
            .map(|&v| {
                let z = (v - mean) / sigma;
                (-(z * z) / T::of(2.0)).exp()
            })
            .collect();
        let mut d = Self::new(grid, weights)?;
        d.fwhm_fraction = fwhm_fraction;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

fn weighted_mean<T: Real>(grid: &[T], weights: &[T]) -> T {
    let terms: Vec<T> = grid.iter().zip(weights).map(|(&v, &w)| v * w).collect();
    pairwise_sum(&terms)
}

/// FWHM of the density implied by the weights (weight / local node spacing).
fn measured_fwhm<T: Real>(grid: &[T], weights: &[T]) -> T {
    let n = grid.len();
    if n < 3 {
        return T::zero();
    }
    let density: Vec<T> = (0..n)
        .map(|i| {
            let lo = if i == 0 {
                grid[0]
            } else {
                (grid[i - 1] + grid[i]) / T::of(2.0)
            };
            let hi = if i + 1 == n {
                grid[n - 1]
            } else {
                (grid[i] + grid[i + 1]) / T::of(2.0)
            };
            let width = if hi > lo { hi - lo } else { grid[1] - grid[0] };
            weights[i] / width
        })
        .collect();
    let (peak_idx, peak) =
        density
            .iter()
            .enumerate()
            .fold(
                (0, T::neg_infinity()),
                |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc },
            );
    let half = peak / T::of(2.0);
    let cross = |i: usize, j: usize| {
        // linear interpolation of the half-maximum crossing between nodes i and j
        let (di, dj) = (density[i], density[j]);
        if di == dj {
            return grid[i];
        }
        grid[i] + (half - di) / (dj - di) * (grid[j] - grid[i])
    };
    let left = (1..=peak_idx)
        .rev()
        .find(|&i| density[i - 1] < half)
        .map(|i| cross(i - 1, i))
        .unwrap_or(grid[0]);
    let right = (peak_idx..n - 1)
        .find(|&i| density[i + 1] < half)
        .map(|i| cross(i, i + 1))
        .unwrap_or(grid[n - 1]);
    right - left
}

/// Flux-weighted harmonic average of per-speed patterns.
///
/// Speeds are evaluated in parallel and summed pairwise in grid order, so the
/// result does not depend on the thread count.
pub fn velocity_average<T, F>(
    dist: &VelocityDistribution<T>,
    pattern_fn: F,
) -> Result<FringePattern<T>>
where
    T: Real,
    F: Fn(T) -> Result<FringePattern<T>> + Sync,
{
    if dist.is_empty() {
        return Err(domain("empty velocity distribution"));
    }
    let patterns: Vec<FringePattern<T>> = dist
        .grid
        .par_iter()
        .map(|&v| pattern_fn(v))
        .collect::<Result<_>>()?;
    let first = &patterns[0];
    for p in &patterns[1..] {
        if p.period != first.period
            || p.m_max != first.m_max
            || p.shift_grid.len() != first.shift_grid.len()
        {
            return Err(domain("patterns on different grids cannot be averaged"));
        }
    }
    let weighted = |f: &dyn Fn(&FringePattern<T>) -> T| -> T {
        let terms: Vec<T> = patterns
            .iter()
            .zip(&dist.weights)
            .map(|(p, &w)| w * f(p))
            .collect();
        pairwise_sum(&terms)
    };
    let harmonics: Vec<Complex<T>> = (0..first.harmonics.len())
        .map(|i| {
            Complex::new(
                weighted(&|p| p.harmonics[i].re),
                weighted(&|p| p.harmonics[i].im),
            )
        })
        .collect();
    let signal: Vec<T> = (0..first.signal.len())
        .map(|j| weighted(&|p| p.signal[j]))
        .collect();
    let signal_error = if patterns.iter().all(|p| p.signal_error.is_some()) {
        Some(
            (0..first.signal.len())
                .map(|j| {
                    let terms: Vec<T> = patterns
                        .iter()
                        .zip(&dist.weights)
                        .map(|(p, &w)| {
                            let e = w * p.signal_error.as_ref().unwrap()[j];
                            e * e
                        })
                        .collect();
                    pairwise_sum(&terms).sqrt()
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(FringePattern {
        period: first.period,
        shift_grid: first.shift_grid.clone(),
        signal,
        harmonics,
        m_max: first.m_max,
        method: first.method,
        signal_error,
        wall_margin: weighted(&|p| p.wall_margin),
    })
}

/// Result of fitting the wall coefficient to a measured visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    /// meV nm^3
    pub c3: T,
    pub achieved: T,
    pub bracket: (T, T),
}

pub const CALIBRATION_TOLERANCE: f64 = 0.002;
const C3_SCAN_STEP: f64 = 5.0;
const C3_SCAN_MAX: f64 = 100.0;

/// Sine-fit visibility of the velocity-averaged quantum pattern at a given c3.
pub fn averaged_visibility<T: Real>(
    config: &InterferometerConfig<T>,
    c3: T,
    dist: &VelocityDistribution<T>,
    settings: &EngineSettings<T>,
) -> Result<T> {
    let cfg = config.clone().with_c3(c3);
    let pattern = velocity_average(dist, |v| quantum_pattern_coefficients(&cfg, v, settings))?;
    visibility(&pattern, VisibilityMode::SineFit)
}

/// Finds the smallest c3 in [0, 100] meV nm^3 whose averaged visibility hits `target`.
pub fn calibrate_c3<T: Real>(
    config: &InterferometerConfig<T>,
    target: T,
    dist: &VelocityDistribution<T>,
    settings: &EngineSettings<T>,
) -> Result<Calibration<T>> {
    if !(target >= T::zero() && target <= T::one()) {
        return Err(domain("target visibility must lie in [0, 1]"));
    }
    let tol = T::of(CALIBRATION_TOLERANCE);
    let steps = (C3_SCAN_MAX / C3_SCAN_STEP).round() as usize;
    let nodes: Vec<T> = (0..=steps)
        .map(|i| T::of(i as f64 * C3_SCAN_STEP))
        .collect();
    let values: Vec<T> = nodes
        .iter()
        .map(|&c| averaged_visibility(config, c, dist, settings))
        .collect::<Result<_>>()?;
    if (values[0] - target).abs() <= tol {
        return Ok(Calibration {
            c3: T::zero(),
            achieved: values[0],
            bracket: (T::zero(), T::zero()),
        });
    }
    let bracket = (0..steps).find(|&i| {
        let a = values[i] - target;
        let b = values[i + 1] - target;
        a == T::zero() || b == T::zero() || (a < T::zero()) != (b < T::zero())
    });
    let Some(i) = bracket else {
        let min = values.iter().cloned().fold(T::infinity(), T::min);
        let max = values.iter().cloned().fold(T::neg_infinity(), T::max);
        return Err(Error::CalibrationInfeasible {
            target: target.as_f64(),
            min: min.as_f64(),
            max: max.as_f64(),
        });
    };
    let (mut lo, mut hi) = (nodes[i], nodes[i + 1]);
    let (mut f_lo, mut f_hi) = (values[i] - target, values[i + 1] - target);
    if f_hi.abs() <= tol && f_lo.abs() > tol {
        return Ok(Calibration {
            c3: hi,
            achieved: values[i + 1],
            bracket: (lo, hi),
        });
    }
    for _ in 0..60 {
        let mid = (lo + hi) / T::of(2.0);
        let f_mid = averaged_visibility(config, mid, dist, settings)? - target;
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        if hi - lo < T::of(1e-4) && (f_lo.abs() <= tol || f_hi.abs() <= tol) {
            break;
        }
    }
    let (c3, f) = if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    if f.abs() > tol {
        return Err(Error::CalibrationInfeasible {
            target: target.as_f64(),
            min: (target + f_lo.min(f_hi)).as_f64(),
            max: (target + f_lo.max(f_hi)).as_f64(),
        });
    }
    Ok(Calibration {
        c3,
        achieved: target + f,
        bracket: (lo, hi),
    })
}
