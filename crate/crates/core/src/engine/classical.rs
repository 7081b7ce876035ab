//! Classical (moiré) patterns: straight-line flight through three masks, with
//! the wall force of grating 2 applied as a single transverse kick.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{common_period, EngineSettings, FringePattern, Method};
use crate::error::{domain, Result};
use crate::grating::{phase_slope, phase_strength, top_hat_coefficient};
use crate::kinematics::{InterferometerConfig, PhysicalConstants};
use crate::num::{mix_seed, Real};

const CHUNK: u64 = 1 << 16;
/// Transverse spread of the incoherent source at grating 2, in periods.
const ANGULAR_SPREAD_PERIODS: f64 = 64.0;

/// Geometric shadow of three binary masks, exact in Fourier space.
///
/// With `r = l2/l1` a molecule crossing grating 1 at `x0` and grating 2 at
/// `x1` reaches `(1 + r) x1 − r x0`. Averaging over an unbounded incoherent
/// source leaves `S_m = A1_{−mr} A2_{m(1+r)} A3_{−m}` for every `m` with `m r`
/// integral, and nothing else. The wall interaction is ignored.
pub fn classical_shadow<T: Real>(
    config: &InterferometerConfig<T>,
    settings: &EngineSettings<T>,
) -> Result<FringePattern<T>> {
    settings.validate()?;
    let g = common_period(config)?;
    let r = (config.l2 / config.l1).as_f64();
    let [f1, f2, f3] = config.gratings.map(|gr| gr.open_fraction);
    let m_max = settings.m_max as isize;
    let harmonics = (-m_max..=m_max)
        .map(|m| {
            let mr = m as f64 * r;
            if (mr - mr.round()).abs() > 1e-9 {
                return Complex::new(T::zero(), T::zero());
            }
            let j = mr.round() as isize;
            top_hat_coefficient(f1, -j)
                * top_hat_coefficient(f2, m + j)
                * top_hat_coefficient(f3, -m)
        })
        .collect();
    Ok(FringePattern::from_harmonics(
        g,
        harmonics,
        settings.shift_samples,
        Method::ClassicalShadow,
        T::zero(),
    ))
}

/// Monte Carlo trajectories with absorbing bars and wall margins.
///
/// Inside the open part of grating 2 each molecule receives the kick
/// `Δv_x = (ħ/m) ∂φ/∂x`, the impulse of the attractive wall force over the
/// transit time `b/v`. The signal is the transmitted fraction per trajectory
/// for each shift of grating 3; `signal_error` holds the Poisson error.
pub fn classical_pattern_mc<T: Real>(
    config: &InterferometerConfig<T>,
    v: T,
    trajectories: u64,
    seed: u64,
    settings: &EngineSettings<T>,
) -> Result<FringePattern<T>> {
    settings.validate()?;
    if trajectories == 0 {
        return Err(domain(
            "classical Monte Carlo needs at least one trajectory",
        ));
    }
    if !(v > T::zero()) {
        return Err(domain(format!("speed must be positive, got {v}")));
    }
    let g = common_period(config)?;
    let margin = settings.margin_for(config, v)?;
    let shifts = settings.shift_samples;
    let [w1, w2, w3] = config.gratings.map(|gr| gr.slit_width().as_f64());
    let m = margin.as_f64();
    let gp = g.as_f64();
    for w in [w1, w2, w3] {
        if 2.0 * m >= w {
            return Err(crate::error::Error::DegenerateSlit {
                margin: m,
                width: w,
            });
        }
    }
    let consts = PhysicalConstants::<T>::codata();
    let strength = phase_strength(&config.species, &config.gratings[1], v);
    // Δx at grating 3 per unit phase slope
    let kick_scale = (consts.reduced_planck / config.species.mass_kg() * config.l2 / v).as_f64();
    let strength = strength.as_f64();
    let ratio = (config.l2 / config.l1).as_f64();
    let step = gp / shifts as f64;
    let open1 = w1 - 2.0 * m;

    let chunks = trajectories.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(trajectories - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, c));
            let mut hist = vec![0u64; shifts];
            for _ in 0..n {
                let x0 = m + open1 * rng.random::<f64>();
                let d = ANGULAR_SPREAD_PERIODS * gp * (rng.random::<f64>() - 0.5);
                let x1 = x0 + d;
                let in2 = x1.rem_euclid(gp);
                if in2 < m || in2 > w2 - m {
                    continue;
                }
                let kick = if strength > 0.0 {
                    kick_scale * phase_slope(strength, w2, in2)
                } else {
                    0.0
                };
                let x3 = x1 + d * ratio + kick;
                let u = x3.rem_euclid(gp);
                // shifts s with (x3 − s) mod g inside [m, w3 − m]
                let lo = ((u - (w3 - m)) / step).ceil() as i64;
                let hi = ((u - m) / step).floor() as i64;
                for j in lo..=hi {
                    hist[j.rem_euclid(shifts as i64) as usize] += 1;
                }
            }
            hist
        })
        .collect();
    let mut total = vec![0u64; shifts];
    for hist in &counts {
        for (t, h) in total.iter_mut().zip(hist) {
            *t += h;
        }
    }
    let weight = open1 / gp / trajectories as f64;
    let signal: Vec<T> = total.iter().map(|&c| T::of(c as f64 * weight)).collect();
    let error: Vec<T> = total
        .iter()
        .map(|&c| T::of((c as f64).sqrt() * weight))
        .collect();
    let mut pattern =
        FringePattern::from_samples(g, signal, settings.m_max, Method::ClassicalMc, margin);
    pattern.signal_error = Some(error);
    Ok(pattern)
}
