//! Talbot-Lau matter-wave interferometer simulation and scan reduction.
//!
//! Every model is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases at the crate root fix the scalar to `f64`.

pub mod beamline;
pub mod engine;
pub mod error;
pub mod fit;
pub mod grating;
pub mod kinematics;
pub mod num;
pub mod scan;

pub use error::{Error, Result};
pub use num::Real;

pub use engine::{
    averaged_visibility, calibrate_c3, classical_pattern_mc, classical_shadow,
    quantum_pattern_coefficients, quantum_pattern_fresnel, velocity_average, visibility,
    EngineSettings, Method, VisibilityMode,
};
pub use kinematics::{de_broglie_wavelength, talbot_length};

pub type PhysicalConstants = kinematics::PhysicalConstants<f64>;
pub type MoleculeSpecies = kinematics::MoleculeSpecies<f64>;
pub type GratingSpec = kinematics::GratingSpec<f64>;
pub type InterferometerConfig = kinematics::InterferometerConfig<f64>;
pub type TransmissionProfile = grating::TransmissionProfile<f64>;
pub type FourierCoefficients = grating::FourierCoefficients<f64>;
pub type FringePattern = engine::FringePattern<f64>;
pub type VelocityDistribution = engine::VelocityDistribution<f64>;
pub type Calibration = engine::Calibration<f64>;
pub type SineFit = fit::SineFit<f64>;
pub type Settings = engine::EngineSettings<f64>;
pub type Slit = beamline::Slit<f64>;
pub type SlitSystem = beamline::SlitSystem<f64>;
pub type SourceSpectrum = beamline::SourceSpectrum<f64>;
pub type ScanRecord = scan::ScanRecord<f64>;
pub type RateScan = scan::RateScan<f64>;
pub type ScanFit = scan::ScanFit<f64>;
pub type DriftModel = scan::DriftModel<f64>;

pub type InterferometerConfigF32 = kinematics::InterferometerConfig<f32>;
pub type FringePatternF32 = engine::FringePattern<f32>;
