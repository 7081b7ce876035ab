//! Quantum near-field patterns.
//!
//! Closed form (symmetric `l1 = l2 = L`): a point source at `x0` on grating 1
//! illuminates grating 2; after a second free flight over `L` the paraxial
//! amplitude at `x` is, up to an `n`-independent phase,
//!
//! `ψ(x) ∝ Σ_n b_n exp(iπ n (x0 + x)/g) exp(−iπ n² L / 2L_T)`.
//!
//! The incoherent average over `x0`, weighted by `|t1|²`, keeps only pairs with
//! `n − n' = 2m` and the grating-3 mask projects onto its own intensity
//! coefficients, giving
//!
//! `S_m = A1_{−m} A3_{−m} Σ_n b_n b*_{n−2m} exp(−2πi m (n − m) L / L_T)`.
//!
//! The propagation route does the same physics numerically: by the Fresnel
//! scaling theorem a spherical wave from `x0` through grating 2 observed after
//! `l2` equals the plane-wave propagation of `t2` over `l1 l2 / (l1 + l2)`,
//! read at `X = (l2 x0 + l1 x) / (l1 + l2)`. The plane-wave step is an FFT
//! transfer function on one period; source positions and detector positions
//! are then summed explicitly.

use num_complex::Complex;
use rayon::prelude::*;

use super::{common_period, EngineSettings, FringePattern, Method};
use crate::error::{domain, Error, Result};
use crate::grating::{
    build_transmission, forward_dft, fourier_coefficients, inverse_dft, max_order,
};
use crate::kinematics::{de_broglie_wavelength, talbot_length, InterferometerConfig};
use crate::num::Real;

/// Oversampling of the propagated field for asymmetric geometries.
const FINE: usize = 8;

fn intensity_profiles<T: Real>(
    config: &InterferometerConfig<T>,
    v: T,
    sample_count: usize,
    margin: T,
) -> Result<(Vec<T>, Vec<T>)> {
    // gratings 1 and 3 only act through |t|²; their wall phase drops out
    let bare = config.species.clone().with_c3(T::zero());
    let t1 = build_transmission(&bare, &config.gratings[0], v, sample_count, margin)?;
    let t3 = build_transmission(&bare, &config.gratings[2], v, sample_count, margin)?;
    Ok((t1.intensity, t3.intensity))
}

/// Closed-form harmonic sum for the symmetric instrument.
pub fn quantum_pattern_coefficients<T: Real>(
    config: &InterferometerConfig<T>,
    v: T,
    settings: &EngineSettings<T>,
) -> Result<FringePattern<T>> {
    settings.validate()?;
    if !config.is_symmetric() {
        return Err(Error::UnsupportedMethod(
            "the closed form needs l1 = l2; use quantum_pattern_fresnel for asymmetric setups"
                .into(),
        ));
    }
    let g = common_period(config)?;
    let n = settings.sample_count;
    let margin = settings.margin_for(config, v)?;
    let t2 = build_transmission(&config.species, &config.gratings[1], v, n, margin)?;
    let b = fourier_coefficients(&t2, max_order(&t2))?;
    let bare = config.species.clone().with_c3(T::zero());
    let m_max = settings.m_max;
    let a1 = fourier_coefficients(
        &build_transmission(&bare, &config.gratings[0], v, n, margin)?,
        m_max.max(1),
    )?;
    let a3 = fourier_coefficients(
        &build_transmission(&bare, &config.gratings[2], v, n, margin)?,
        m_max.max(1),
    )?;

    let lt = talbot_length(g, de_broglie_wavelength(&config.species, v)?)?;
    let ratio = (config.l1 / lt).as_f64();
    let order = b.order_max as isize;

    let mut harmonics = vec![Complex::new(T::zero(), T::zero()); 2 * m_max + 1];
    for m in 0..=m_max as isize {
        let lo = (-order).max(2 * m - order);
        let hi = order.min(2 * m + order);
        let mut acc = Complex::new(0.0f64, 0.0);
        for k in lo..=hi {
            let bk = b.b(k);
            let bl = b.b(k - 2 * m).conj();
            let prod = Complex::new(
                (bk.re * bl.re - bk.im * bl.im).as_f64(),
                (bk.re * bl.im + bk.im * bl.re).as_f64(),
            );
            // reduce the phase in turns before scaling by 2π
            let turns = (m * (k - m)) as f64 * ratio;
            let frac = turns - turns.round();
            let arg = -std::f64::consts::TAU * frac;
            acc += prod * Complex::new(arg.cos(), arg.sin());
        }
        let sum = Complex::new(T::of(acc.re), T::of(acc.im));
        let s_m = a1.a(-m) * a3.a(-m) * sum;
        harmonics[(m + m_max as isize) as usize] = s_m;
        if m > 0 {
            harmonics[(m_max as isize - m) as usize] = s_m.conj();
        }
    }
    harmonics[m_max].im = T::zero();
    Ok(FringePattern::from_harmonics(
        g,
        harmonics,
        settings.shift_samples,
        Method::QuantumCoefficient,
        margin,
    ))
}

/// Source-averaged intensity in front of grating 3 over two periods, at cell
/// centres `(q + ½) g/N`, `q < 2N`, together with the grating-3 mask and margin.
///
/// A single source point gives an intensity of period `2g` when `l1 = l2`;
/// the incoherent sum over grating 1 leaves period `g`.
pub fn fresnel_detector_intensity<T: Real>(
    config: &InterferometerConfig<T>,
    v: T,
    source_samples: usize,
    grid_size: usize,
    settings: &EngineSettings<T>,
) -> Result<(Vec<f64>, Vec<f64>, T)> {
    settings.validate()?;
    if !grid_size.is_power_of_two() || grid_size < 4096 {
        return Err(domain(format!(
            "grid_size must be a power of two ≥ 4096, got {grid_size}"
        )));
    }
    if source_samples < 64 || grid_size % source_samples != 0 {
        return Err(domain(format!(
            "source_samples must be ≥ 64 and divide grid_size, got {source_samples}"
        )));
    }
    let g = common_period(config)?;
    let n = grid_size;
    let margin = settings.margin_for(config, v)?;
    let t2 = build_transmission(&config.species, &config.gratings[1], v, n, margin)?;
    if t2.edge_phase_step() > T::PI() {
        return Err(Error::Resolution(format!(
            "wall phase advances {:.2} rad per cell at the {:.3e} m margin; use a finer grid",
            t2.edge_phase_step().as_f64(),
            margin.as_f64()
        )));
    }
    let (w1, mask) = intensity_profiles(config, v, n, margin)?;

    let lambda = de_broglie_wavelength(&config.species, v)?;
    let l_eff = config.l1 * config.l2 / (config.l1 + config.l2);
    let propagated = propagate_oversampled(&t2.amplitude, g, lambda, l_eff, 2);
    let intensity: Vec<f64> = propagated.iter().map(|c| c.norm_sqr().as_f64()).collect();

    // two source cells: the slit one period over shifts the pattern by g
    let stride = n / source_samples;
    let sources: Vec<(usize, f64)> = (0..2 * n)
        .step_by(stride)
        .map(|p| (p, w1[p % n].as_f64()))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let inv_sources = 0.5 / source_samples as f64;

    // averaged intensity at detector cell centres x_q = (q + ½) g/n, q ∈ [0, 2n)
    let averaged: Vec<f64> = if config.is_symmetric() {
        // X = (x0 + x)/2 lands on the doubled grid at index p + q
        (0..2 * n)
            .into_par_iter()
            .map(|q| {
                let total: f64 = sources
                    .iter()
                    .map(|&(p, w)| w * intensity[(p + q) % (2 * n)])
                    .sum();
                total * inv_sources
            })
            .collect()
    } else {
        let fine = propagate_oversampled(&t2.amplitude, g, lambda, l_eff, FINE);
        let fine: Vec<f64> = fine.iter().map(|c| c.norm_sqr().as_f64()).collect();
        let (l1, l2) = (config.l1.as_f64(), config.l2.as_f64());
        let dx = g.as_f64() / n as f64;
        (0..2 * n)
            .into_par_iter()
            .map(|q| {
                let x = (q as f64 + 0.5) * dx;
                let total: f64 = sources
                    .iter()
                    .map(|&(p, w)| {
                        let x0 = (p as f64 + 0.5) * dx;
                        let big_x = (l2 * x0 + l1 * x) / (l1 + l2);
                        w * interpolate_periodic(&fine, big_x / g.as_f64(), FINE)
                    })
                    .sum();
                total * inv_sources
            })
            .collect()
    };

    let mask: Vec<f64> = mask.iter().map(|m| m.as_f64()).collect();
    Ok((averaged, mask, margin))
}

/// Direct paraxial propagation with an explicit incoherent source sum.
///
/// `grid_size` cells per period (power of two, ≥ 4096); `source_samples`
/// source positions per period (≥ 64, dividing `grid_size`). The detector
/// integral runs over two periods, which is the common period of the
/// intensity at grating 3 when `l1 = l2`.
pub fn quantum_pattern_fresnel<T: Real>(
    config: &InterferometerConfig<T>,
    v: T,
    source_samples: usize,
    grid_size: usize,
    settings: &EngineSettings<T>,
) -> Result<FringePattern<T>> {
    let shifts = settings.shift_samples;
    if grid_size % shifts != 0 {
        return Err(domain(format!(
            "shift_samples {shifts} must divide grid_size {grid_size}"
        )));
    }
    let (averaged, mask, margin) =
        fresnel_detector_intensity(config, v, source_samples, grid_size, settings)?;
    let g = common_period(config)?;
    let n = grid_size;
    let per_shift = n / shifts;
    let signal: Vec<T> = (0..shifts)
        .map(|j| {
            let offset = j * per_shift;
            let total: f64 = (0..2 * n)
                .map(|q| mask[(q + 2 * n - offset) % n] * averaged[q])
                .sum();
            T::of(total / (2 * n) as f64)
        })
        .collect();
    let sampled =
        FringePattern::from_samples(g, signal, settings.m_max, Method::QuantumFresnel, margin);
    // resynthesise so the samples and the kept harmonics describe the same pattern
    Ok(FringePattern::from_harmonics(
        g,
        sampled.harmonics,
        shifts,
        Method::QuantumFresnel,
        margin,
    ))
}

/// Plane-wave Fresnel propagation of one period of `field` over `distance`,
/// returned on a grid `factor` times finer. Input samples sit at cell centres
/// `(k + ½) g/N`; output sample `r` sits at `g/(2N) + r g/(factor N)`.
fn propagate_oversampled<T: Real>(
    field: &[Complex<T>],
    period: T,
    wavelength: T,
    distance: T,
    factor: usize,
) -> Vec<Complex<T>> {
    let n = field.len();
    let spec = forward_dft(field);
    let big = n * factor;
    let mut padded = vec![Complex::new(T::zero(), T::zero()); big];
    let half = n / 2;
    let chirp = (wavelength * distance / (period * period)).as_f64();
    for (idx, &coef) in spec.iter().enumerate() {
        let k = if idx < half {
            idx as isize
        } else {
            idx as isize - n as isize
        };
        let turns = -0.5 * chirp * (k * k) as f64;
        let arg = std::f64::consts::TAU * (turns - turns.round());
        let phase = Complex::new(T::of(arg.cos()), T::of(arg.sin()));
        if idx == half {
            // Nyquist bin split evenly between ±N/2
            let c = coef * phase * T::of(0.5 / n as f64);
            padded[half] = padded[half] + c;
            padded[big - half] = padded[big - half] + c;
        } else {
            let dest = if k < 0 {
                (big as isize + k) as usize
            } else {
                k as usize
            };
            padded[dest] = coef * phase * T::of(1.0 / n as f64);
        }
    }
    // inverse_dft divides by the length; the trig polynomial needs the plain sum
    let scale = T::of_usize(big);
    inverse_dft(&padded)
        .into_iter()
        .map(|c| c * scale)
        .collect()
}

/// Linear interpolation in a table from [`propagate_oversampled`] at `x/g = u`.
fn interpolate_periodic(table: &[f64], u: f64, factor: usize) -> f64 {
    let len = table.len() as f64;
    let pos = (u * len - 0.5 * factor as f64).rem_euclid(len);
    let i = pos.floor() as usize % table.len();
    let frac = pos - pos.floor();
    table[i] * (1.0 - frac) + table[(i + 1) % table.len()] * frac
}
