//! Effusive source spectrum and gravitational velocity selection.
//!
//! Molecules leave the oven orifice (slit 0) and fly on free-fall parabolas
//! `y(z) = y0 + θ z − g z² / (2 v²)`. Downstream horizontal slits keep only the
//! parabolas passing every opening; for a fixed emission height each slit
//! constrains θ to an interval, so the angular integral is exact and only the
//! emission height is sampled (stratified midpoints).

use rayon::prelude::*;

use crate::engine::VelocityDistribution;
use crate::error::{domain, Error, Result};
use crate::kinematics::{MoleculeSpecies, PhysicalConstants};
use crate::num::{pairwise_sum, Real};

pub const DEFAULT_EMISSION_SAMPLES: usize = 2000;
/// Half-width of the emission cone, rad. Wide enough never to bind.
pub const DEFAULT_ANGLE_WINDOW: f64 = 1e-2;
pub const MAX_TAIL_MASS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slit<T> {
    /// Distance from the oven orifice, m.
    pub position: T,
    /// Height of the slit centre, m.
    pub center: T,
    /// Full opening, m.
    pub opening: T,
}

impl<T: Real> Slit<T> {
    pub fn new(position: T, center: T, opening: T) -> Self {
        Self {
            position,
            center,
            opening,
        }
    }
}

/// Ordered slits; the first is the oven orifice.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitSystem<T> {
    pub slits: Vec<Slit<T>>,
    /// Vertical displacement of the oven, added to the orifice centre.
    pub source_height_offset: T,
    pub gravity: T,
    /// Emission angles are uniform in ±angle_window.
    pub angle_window: T,
}

impl<T: Real> SlitSystem<T> {
    pub fn new(slits: Vec<Slit<T>>, source_height_offset: T) -> Result<Self> {
        let s = Self {
            slits,
            source_height_offset,
            gravity: PhysicalConstants::<T>::codata().local_gravity,
            angle_window: T::of(DEFAULT_ANGLE_WINDOW),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slits.is_empty() {
            return Err(domain("slit system has no slits"));
        }
        if self.slits.iter().any(|s| !(s.opening > T::zero())) {
            return Err(domain("slit openings must be positive"));
        }
        if self
            .slits
            .windows(2)
            .any(|w| !(w[1].position > w[0].position))
        {
            return Err(domain("slit positions must be strictly increasing"));
        }
        if !(self.angle_window > T::zero()) || !(self.gravity >= T::zero()) {
            return Err(domain(
                "angle window must be positive and gravity non-negative",
            ));
        }
        Ok(())
    }

    /// Oven, 150 µm limiter at `z2`, 100 µm slit at `z3`, all centred at zero
    /// height; the oven offset puts the parabola for `v_select` through the
    /// two downstream slit centres.
    pub fn three_slit(z2: T, z3: T, v_select: T) -> Result<Self> {
        let mut s = Self::new(
            vec![
                Slit::new(T::zero(), T::zero(), T::of(200e-6)),
                Slit::new(z2, T::zero(), T::of(150e-6)),
                Slit::new(z3, T::zero(), T::of(100e-6)),
            ],
            T::zero(),
        )?;
        s.source_height_offset = parabola_offset(z2, z3, v_select, s.gravity);
        Ok(s)
    }

    /// Porphyrin beam line: limiter at 1.38 m.
    pub fn tpp(z3: T, v_select: T) -> Result<Self> {
        Self::three_slit(T::of(1.38), z3, v_select)
    }

    /// Fluorofullerene beam line: limiter at 1.26 m.
    pub fn c60f48(z3: T, v_select: T) -> Result<Self> {
        Self::three_slit(T::of(1.26), z3, v_select)
    }

    pub fn with_offset(mut self, offset: T) -> Self {
        self.source_height_offset = offset;
        self
    }
}

/// Oven height for which the parabola at speed `v` passes height zero at `z2` and `z3`.
pub fn parabola_offset<T: Real>(z2: T, z3: T, v: T, gravity: T) -> T {
    -gravity * z2 * z3 / (T::of(2.0) * v * v)
}

/// Fraction of emitted molecules at speed `v` passing every slit.
pub fn parabola_transmission<T: Real>(
    slits: &SlitSystem<T>,
    v: T,
    emission_samples: usize,
) -> Result<T> {
    slits.validate()?;
    if !(v > T::zero()) {
        return Err(domain(format!("speed must be positive, got {v}")));
    }
    if emission_samples < 1000 {
        return Err(domain(format!(
            "emission_samples must be ≥ 1000, got {emission_samples}"
        )));
    }
    let source = slits.slits[0];
    let y_lo = source.center + slits.source_height_offset - source.opening / T::of(2.0);
    let sag = slits.gravity / (T::of(2.0) * v * v);
    let window = slits.angle_window;
    let h = source.opening / T::of_usize(emission_samples);
    let z0 = source.position;
    let accepted: Vec<T> = (0..emission_samples)
        .map(|k| {
            let y0 = y_lo + (T::of_usize(k) + T::of(0.5)) * h;
            let (mut lo, mut hi) = (-window, window);
            for s in &slits.slits[1..] {
                let dz = s.position - z0;
                let drop = sag * dz * dz;
                let half = s.opening / T::of(2.0);
                lo = lo.max((s.center - half - y0 + drop) / dz);
                hi = hi.min((s.center + half - y0 + drop) / dz);
            }
            (hi - lo).max(T::zero())
        })
        .collect();
    Ok(pairwise_sum(&accepted) / (T::of_usize(emission_samples) * T::of(2.0) * window))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpectrum<T> {
    /// K
    pub temperature: T,
    pub species: MoleculeSpecies<T>,
}

impl<T: Real> SourceSpectrum<T> {
    pub fn new(temperature: T, species: MoleculeSpecies<T>) -> Result<Self> {
        if !(temperature > T::zero()) {
            return Err(domain(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            temperature,
            species,
        })
    }

    /// `sqrt(2 k_B T / m)`
    pub fn thermal_speed(&self) -> T {
        let c = PhysicalConstants::<T>::codata();
        (T::of(2.0) * c.boltzmann * self.temperature / self.species.mass_kg()).sqrt()
    }

    /// Peak of the flux-weighted spectrum, `sqrt(3 k_B T / m)`.
    pub fn most_probable_speed(&self) -> T {
        self.thermal_speed() * T::of(1.5).sqrt()
    }

    /// Uniform grid over `[lo, hi]` × the most probable speed.
    pub fn grid(&self, lo: f64, hi: f64, points: usize) -> Vec<T> {
        let vp = self.most_probable_speed().as_f64();
        (0..points)
            .map(|i| T::of(vp * (lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64)))
            .collect()
    }

    /// Probability outside `[v_lo, v_hi]`; the flux spectrum has CDF `1 − (1 + u) e^{−u}`, `u = (v/v_th)²`.
    pub fn tail_mass(&self, v_lo: T, v_hi: T) -> T {
        let vth = self.thermal_speed();
        let cdf = |v: T| {
            let u = (v / vth).powi(2);
            T::one() - (T::one() + u) * (-u).exp()
        };
        cdf(v_lo) + (T::one() - cdf(v_hi))
    }
}

/// Flux-weighted Maxwell spectrum, `∝ v³ exp(−m v² / 2 k_B T)`, on `grid`.
pub fn effusive_flux_spectrum<T: Real>(
    src: &SourceSpectrum<T>,
    grid: &[T],
) -> Result<VelocityDistribution<T>> {
    let weights = flux_weights(src, grid)?;
    VelocityDistribution::new(grid.to_vec(), weights)
}

fn flux_weights<T: Real>(src: &SourceSpectrum<T>, grid: &[T]) -> Result<Vec<T>> {
    if grid.len() < 2 {
        return Err(domain("speed grid needs at least two points"));
    }
    let tail = src.tail_mass(grid[0], grid[grid.len() - 1]);
    if tail.as_f64() > MAX_TAIL_MASS {
        return Err(Error::Coverage {
            tail: tail.as_f64(),
        });
    }
    let vth = src.thermal_speed();
    Ok(grid
        .iter()
        .map(|&v| {
            let x = v / vth;
            x * x * x * (-(x * x)).exp()
        })
        .collect())
}

/// Effusive spectrum times the slit transmission, renormalised.
pub fn selected_distribution<T: Real>(
    src: &SourceSpectrum<T>,
    slits: &SlitSystem<T>,
    grid: &[T],
    emission_samples: usize,
) -> Result<VelocityDistribution<T>> {
    let flux = flux_weights(src, grid)?;
    let transmission: Vec<T> = grid
        .par_iter()
        .map(|&v| parabola_transmission(slits, v, emission_samples))
        .collect::<Result<_>>()?;
    let weights: Vec<T> = flux
        .iter()
        .zip(&transmission)
        .map(|(&f, &t)| f * t)
        .collect();
    if weights.iter().all(|&w| w == T::zero()) {
        return Err(Error::NoBeam);
    }
    VelocityDistribution::new(grid.to_vec(), weights)
}

/// Source offset giving the selected distribution a mean of `target_mean`.
///
/// The mean rises monotonically as the oven moves up towards the slit line;
/// the root is bracketed around the straight parabola offset and bisected.
pub fn tune_source_offset<T: Real>(
    src: &SourceSpectrum<T>,
    slits: &SlitSystem<T>,
    grid: &[T],
    emission_samples: usize,
    target_mean: T,
) -> Result<SlitSystem<T>> {
    if slits.slits.len() < 3 {
        return Err(domain("offset tuning needs at least three slits"));
    }
    let (z2, z3) = (
        slits.slits[1].position,
        slits.slits[slits.slits.len() - 1].position,
    );
    let guess = parabola_offset(z2, z3, target_mean, slits.gravity);
    let mean_at = |offset: T| -> Result<T> {
        match selected_distribution(
            src,
            &slits.clone().with_offset(offset),
            grid,
            emission_samples,
        ) {
            Ok(d) => Ok(d.mean - target_mean),
            Err(Error::NoBeam) => Err(Error::NoBeam),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = (guess * T::of(1.5), guess / T::of(1.5));
    let (f_lo, f_hi) = (mean_at(lo)?, mean_at(hi)?);
    if f_lo > T::zero() || f_hi < T::zero() {
        return Err(domain(format!(
            "mean speed {target_mean} is not bracketed by offsets [{lo}, {hi}] m"
        )));
    }
    for _ in 0..60 {
        let mid = (lo + hi) / T::of(2.0);
        if mean_at(mid)? < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < T::of(1e-9) {
            break;
        }
    }
    Ok(slits.clone().with_offset((lo + hi) / T::of(2.0)))
}
