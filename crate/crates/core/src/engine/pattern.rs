use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fit::fit_sine;
use crate::grating::forward_dft;
use crate::num::Real;

/// How a pattern was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    QuantumCoefficient,
    QuantumFresnel,
    ClassicalMc,
    ClassicalShadow,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::QuantumCoefficient => "quantum-coefficient",
            Method::QuantumFresnel => "quantum-fresnel",
            Method::ClassicalMc => "classical-mc",
            Method::ClassicalShadow => "classical-shadow",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            Method::QuantumCoefficient,
            Method::QuantumFresnel,
            Method::ClassicalMc,
            Method::ClassicalShadow,
        ]
        .into_iter()
        .find(|m| m.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisibilityMode {
    /// `2 |S_1| / S_0`.
    FirstHarmonic,
    /// Least-squares `a + c sin(2π s/g + φ)` on the sampled signal, `c / a`.
    SineFit,
}

/// Detector flux versus third-grating shift over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct FringePattern<T> {
    pub period: T,
    pub shift_grid: Vec<T>,
    pub signal: Vec<T>,
    /// `S_m` stored at index `m + m_max`.
    pub harmonics: Vec<Complex<T>>,
    pub m_max: usize,
    pub method: Method,
    /// Per-bin one-sigma statistical error (Monte Carlo only).
    pub signal_error: Option<Vec<T>>,
    /// Wall margin used by the model, m.
    pub wall_margin: T,
}

impl<T: Real> FringePattern<T> {
    fn grid(period: T, samples: usize) -> Vec<T> {
        (0..samples)
            .map(|j| period * T::of_usize(j) / T::of_usize(samples))
            .collect()
    }

    /// Builds the sampled signal from harmonics `S_m`, `|m| ≤ m_max`.
    pub fn from_harmonics(
        period: T,
        harmonics: Vec<Complex<T>>,
        shift_samples: usize,
        method: Method,
        wall_margin: T,
    ) -> Self {
        let m_max = (harmonics.len() - 1) / 2;
        let shift_grid = Self::grid(period, shift_samples);
        let mut p = Self {
            period,
            signal: Vec::new(),
            shift_grid,
            harmonics,
            m_max,
            method,
            signal_error: None,
            wall_margin,
        };
        p.signal = p.shift_grid.iter().map(|&s| p.eval(s)).collect();
        p
    }

    /// Builds a pattern from samples on the uniform grid `j g / len`.
    pub fn from_samples(
        period: T,
        signal: Vec<T>,
        m_max: usize,
        method: Method,
        wall_margin: T,
    ) -> Self {
        let n = signal.len();
        let data: Vec<Complex<T>> = signal.iter().map(|&x| Complex::new(x, T::zero())).collect();
        let spec = forward_dft(&data);
        let scale = T::one() / T::of_usize(n);
        let harmonics = (-(m_max as isize)..=m_max as isize)
            .map(|m| {
                let idx = if m < 0 {
                    (n as isize + m) as usize
                } else {
                    m as usize
                };
                spec[idx] * scale
            })
            .collect();
        Self {
            period,
            shift_grid: Self::grid(period, n),
            signal,
            harmonics,
            m_max,
            method,
            signal_error: None,
            wall_margin,
        }
    }

    /// A pure sinusoid `mean (1 + V sin(2π s/g + φ))`.
    pub fn sinusoid(period: T, mean: T, visibility: T, phase: T, shift_samples: usize) -> Self {
        let half = mean * visibility / T::of(2.0);
        // sin θ = (e^{iθ} − e^{−iθ}) / 2i
        let s1 = Complex::new(T::zero(), -T::one()) * Complex::new(phase.cos(), phase.sin()) * half;
        let harmonics = vec![s1.conj(), Complex::new(mean, T::zero()), s1];
        Self::from_harmonics(
            period,
            harmonics,
            shift_samples,
            Method::QuantumCoefficient,
            T::zero(),
        )
    }

    pub fn harmonic(&self, m: isize) -> Complex<T> {
        if m.unsigned_abs() > self.m_max {
            return Complex::new(T::zero(), T::zero());
        }
        self.harmonics[(m + self.m_max as isize) as usize]
    }

    pub fn mean(&self) -> T {
        self.harmonic(0).re
    }

    /// S(s) from the harmonics at any shift.
    pub fn eval(&self, s: T) -> T {
        let mut acc = self.harmonic(0).re;
        let base = T::TAU() * s / self.period;
        for m in 1..=self.m_max {
            let arg = base * T::of_usize(m);
            let e = Complex::new(arg.cos(), arg.sin());
            acc = acc + T::of(2.0) * (self.harmonic(m as isize) * e).re;
        }
        acc
    }

    /// `|S_2| / |S_1|`, the truncation diagnostic.
    pub fn second_harmonic_ratio(&self) -> T {
        let s1 = self.harmonic(1).norm();
        if s1 == T::zero() {
            return T::infinity();
        }
        self.harmonic(2).norm() / s1
    }

    pub fn visibility(&self, mode: VisibilityMode) -> Result<T> {
        visibility(self, mode)
    }

    /// `g / m*` for the strongest harmonic `m*` ≥ 1.
    pub fn dominant_period(&self) -> T {
        let mut best = (1usize, T::neg_infinity());
        for m in 1..=self.m_max {
            let a = self.harmonic(m as isize).norm();
            if a > best.1 {
                best = (m, a);
            }
        }
        self.period / T::of_usize(best.0)
    }
}

/// Fringe visibility of a pattern.
pub fn visibility<T: Real>(pattern: &FringePattern<T>, mode: VisibilityMode) -> Result<T> {
    let s0 = pattern.mean();
    if !(s0 > T::zero()) {
        return Err(Error::DegeneratePattern(s0.as_f64()));
    }
    match mode {
        VisibilityMode::FirstHarmonic => Ok(T::of(2.0) * pattern.harmonic(1).norm() / s0),
        VisibilityMode::SineFit => {
            let fit = fit_sine(&pattern.shift_grid, &pattern.signal, pattern.period)?;
            if !(fit.offset > T::zero()) {
                return Err(Error::DegeneratePattern(fit.offset.as_f64()));
            }
            Ok(fit.amplitude / fit.offset)
        }
    }
}
