//! Physical constants, the experiment's building blocks and the two basic
//! kinematic relations (de Broglie wavelength, Talbot length).
//!
//! Everything is stored in SI internally. Species masses are accepted in amu
//! and wall-interaction strengths in meV·nm³, the units the literature quotes.

use crate::error::{domain, Error, Result};
use crate::num::Real;

const PLANCK: f64 = 6.626_070_15e-34;
const BOLTZMANN: f64 = 1.380_649e-23;
const AMU: f64 = 1.660_539_066_60e-27;
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const STANDARD_GRAVITY: f64 = 9.806_65;

/// CODATA constants used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    /// J·s
    pub planck_constant: T,
    /// J·s
    pub reduced_planck: T,
    /// J/K
    pub boltzmann: T,
    /// kg
    pub amu: T,
    /// m/s²
    pub local_gravity: T,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn codata() -> Self {
        Self {
            planck_constant: T::of(PLANCK),
            reduced_planck: T::of(PLANCK / (2.0 * std::f64::consts::PI)),
            boltzmann: T::of(BOLTZMANN),
            amu: T::of(AMU),
            local_gravity: T::of(STANDARD_GRAVITY),
        }
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata()
    }
}

/// 1 meV divided by ħ, in rad/s.
pub(crate) fn mev_over_hbar<T: Real>() -> T {
    T::of(ELEMENTARY_CHARGE * 1e-3 / (PLANCK / (2.0 * std::f64::consts::PI)))
}

pub fn amu_to_kg<T: Real>(mass_amu: T) -> T {
    mass_amu * T::of(AMU)
}

pub fn kg_to_amu<T: Real>(mass_kg: T) -> T {
    mass_kg / T::of(AMU)
}

/// A molecular species: mass and strength of the attractive wall interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeSpecies<T> {
    pub name: String,
    /// amu
    pub mass: T,
    /// Wall-interaction coefficient of the −C3/r³ potential, meV·nm³.
    pub c3: T,
}

impl<T: Real> MoleculeSpecies<T> {
    pub fn new(name: impl Into<String>, mass_amu: T, c3_mev_nm3: T) -> Result<Self> {
        if !(mass_amu > T::zero()) || !mass_amu.is_finite() {
            return Err(domain(format!(
                "species mass must be positive, got {mass_amu}"
            )));
        }
        if !(c3_mev_nm3 >= T::zero()) || !c3_mev_nm3.is_finite() {
            return Err(domain(format!("c3 must be non-negative, got {c3_mev_nm3}")));
        }
        Ok(Self {
            name: name.into(),
            mass: mass_amu,
            c3: c3_mev_nm3,
        })
    }

    /// meso-tetraphenylporphyrin, C44H30N4. `c3` starts uncalibrated (zero).
    pub fn tpp() -> Self {
        Self::new("TPP", T::of(614.0), T::zero()).unwrap()
    }

    /// Fluorofullerene C60F48. `c3` starts uncalibrated (zero).
    pub fn c60f48() -> Self {
        Self::new("C60F48", T::of(1632.0), T::zero()).unwrap()
    }

    pub fn c70() -> Self {
        Self::new("C70", T::of(840.0), T::zero()).unwrap()
    }

    pub fn with_c3(mut self, c3_mev_nm3: T) -> Self {
        self.c3 = c3_mev_nm3;
        self
    }

    pub fn mass_kg(&self) -> T {
        amu_to_kg(self.mass)
    }

    /// C3/ħ in m³/s. Kept as a ratio so the value stays representable in `f32`.
    pub fn c3_over_hbar(&self) -> T {
        self.c3 * mev_over_hbar::<T>() * T::of(1e-27)
    }
}

/// One transmission grating. All three gratings of the instrument share this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingSpec<T> {
    /// m
    pub period: T,
    pub open_fraction: T,
    /// m
    pub thickness: T,
}

impl<T: Real> GratingSpec<T> {
    pub fn new(period: T, open_fraction: T, thickness: T) -> Result<Self> {
        if !(period > T::zero()) || !period.is_finite() {
            return Err(domain(format!(
                "grating period must be positive, got {period}"
            )));
        }
        if !(open_fraction > T::zero() && open_fraction < T::one()) {
            return Err(domain(format!(
                "open fraction must lie in (0, 1), got {open_fraction}"
            )));
        }
        if !(thickness > T::zero()) || !thickness.is_finite() {
            return Err(domain(format!(
                "grating thickness must be positive, got {thickness}"
            )));
        }
        Ok(Self {
            period,
            open_fraction,
            thickness,
        })
    }

    /// The gold gratings of the experiment: 991.3 nm period, 48 % open, 500 nm thick.
    pub fn paper() -> Self {
        Self::new(T::of(991.3e-9), T::of(0.48), T::of(500e-9)).unwrap()
    }

    pub fn slit_width(&self) -> T {
        self.open_fraction * self.period
    }
}

/// A complete three-grating experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerConfig<T> {
    pub gratings: [GratingSpec<T>; 3],
    /// Distance grating 1 → grating 2, m.
    pub l1: T,
    /// Distance grating 2 → grating 3, m.
    pub l2: T,
    pub species: MoleculeSpecies<T>,
}

impl<T: Real> InterferometerConfig<T> {
    pub fn new(
        gratings: [GratingSpec<T>; 3],
        l1: T,
        l2: T,
        species: MoleculeSpecies<T>,
    ) -> Result<Self> {
        if !(l1 > T::zero()) || !(l2 > T::zero()) {
            return Err(domain(format!(
                "grating separations must be positive, got {l1}, {l2}"
            )));
        }
        Ok(Self {
            gratings,
            l1,
            l2,
            species,
        })
    }

    pub fn symmetric(
        grating: GratingSpec<T>,
        separation: T,
        species: MoleculeSpecies<T>,
    ) -> Result<Self> {
        Self::new([grating; 3], separation, separation, species)
    }

    /// Porphyrin setup: paper gratings, 0.22 m separations.
    pub fn tpp() -> Self {
        Self::symmetric(GratingSpec::paper(), T::of(0.22), MoleculeSpecies::tpp()).unwrap()
    }

    /// Fluorofullerene setup: paper gratings, 0.38 m separations.
    pub fn c60f48() -> Self {
        Self::symmetric(GratingSpec::paper(), T::of(0.38), MoleculeSpecies::c60f48()).unwrap()
    }

    pub fn is_symmetric(&self) -> bool {
        self.l1 == self.l2
    }

    pub fn with_c3(mut self, c3: T) -> Self {
        self.species.c3 = c3;
        self
    }
}

/// λ = h / (m v).
pub fn de_broglie_wavelength<T: Real>(species: &MoleculeSpecies<T>, v: T) -> Result<T> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(domain(format!("speed must be positive, got {v}")));
    }
    Ok(T::of(PLANCK) / (species.mass_kg() * v))
}

/// L_T = g² / λ.
pub fn talbot_length<T: Real>(period: T, wavelength: T) -> Result<T> {
    if !(period > T::zero()) || !(wavelength > T::zero()) {
        return Err(Error::Domain(format!(
            "period and wavelength must be positive, got {period}, {wavelength}"
        )));
    }
    Ok(period * period / wavelength)
}
