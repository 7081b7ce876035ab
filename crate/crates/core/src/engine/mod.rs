//! Detector signal versus third-grating shift.
//!
//! Two quantum routes (closed-form harmonic sum and direct paraxial
//! propagation) and two classical routes (analytic shadow and Monte Carlo
//! trajectories with wall kicks) all produce a [`FringePattern`]: the signal
//! `S(s)` sampled on a shift grid over one period together with its harmonics
//! `S_m`, `S(s) = Σ_m S_m exp(2πi m s / g)`.

mod classical;
mod pattern;
mod quantum;
mod velocity;

pub use classical::{classical_pattern_mc, classical_shadow};
pub use pattern::{visibility, FringePattern, Method, VisibilityMode};
pub use quantum::{
    fresnel_detector_intensity, quantum_pattern_coefficients, quantum_pattern_fresnel,
};
pub use velocity::{
    averaged_visibility, calibrate_c3, velocity_average, Calibration, VelocityDistribution,
    CALIBRATION_TOLERANCE,
};

use crate::error::{domain, Result};
use crate::grating::{self, DEFAULT_CUTOFF_PHASE, DEFAULT_N_MAX, DEFAULT_SAMPLE_COUNT};
use crate::kinematics::InterferometerConfig;
use crate::num::Real;

pub const DEFAULT_M_MAX: usize = 10;
pub const DEFAULT_SHIFT_SAMPLES: usize = 64;

/// Numerical knobs shared by every pattern method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineSettings<T> {
    /// Cells per grating period for the transmission profiles.
    pub sample_count: usize,
    /// Reported Fourier orders of the transmission.
    pub n_max: usize,
    /// Pattern harmonics kept.
    pub m_max: usize,
    /// Points of the shift grid over one period.
    pub shift_samples: usize,
    /// Wall phase beyond which the slit is treated as absorbing, rad.
    pub cutoff_phase: T,
    /// Fixed wall margin, m. `None` derives it from `cutoff_phase`.
    pub wall_margin: Option<T>,
}

impl<T: Real> Default for EngineSettings<T> {
    fn default() -> Self {
        Self {
            sample_count: DEFAULT_SAMPLE_COUNT,
            n_max: DEFAULT_N_MAX,
            m_max: DEFAULT_M_MAX,
            shift_samples: DEFAULT_SHIFT_SAMPLES,
            cutoff_phase: T::of(DEFAULT_CUTOFF_PHASE),
            wall_margin: None,
        }
    }
}

impl<T: Real> EngineSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 16 {
            return Err(domain("sample_count must be at least 16"));
        }
        if self.m_max < 1 {
            return Err(domain("m_max must be at least 1"));
        }
        if self.shift_samples < 2 * self.m_max + 1 {
            return Err(domain(format!(
                "shift_samples {} cannot carry {} harmonics",
                self.shift_samples, self.m_max
            )));
        }
        if self.n_max < 1 || self.n_max >= self.sample_count / 2 {
            return Err(domain(format!(
                "n_max {} must lie in [1, sample_count/2)",
                self.n_max
            )));
        }
        Ok(())
    }

    /// Wall margin applied to all three gratings at speed `v`.
    pub fn margin_for(&self, config: &InterferometerConfig<T>, v: T) -> Result<T> {
        match self.wall_margin {
            Some(m) => Ok(m),
            None => {
                grating::wall_margin(&config.species, &config.gratings[1], v, self.cutoff_phase)
            }
        }
    }
}

pub(crate) fn common_period<T: Real>(config: &InterferometerConfig<T>) -> Result<T> {
    let g = config.gratings[0].period;
    if config.gratings.iter().any(|gr| gr.period != g) {
        return Err(domain("all three gratings must share one period"));
    }
    Ok(g)
}
