//! Grating transmission with the attractive wall phase, and its Fourier
//! coefficients.
//!
//! One grating period is laid out as `[0, g)` with the open slit at `[0, w)`,
//! `w = f·g`. Inside the slit the molecule picks up the eikonal phase of the
//! −C3/r³ potential of both walls over the grating depth `b`:
//!
//! `φ(x) = (C3 b / ħ v) · (1/x³ + 1/(w − x)³)`
//!
//! The phase diverges at the walls, so a margin next to each wall is treated
//! as absorbing. Samples are cell averages over `[k dx, (k+1) dx)`, which keeps
//! partially covered edge cells exact and lets the coefficient extraction undo
//! the box filter.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{domain, Error, Result};
use crate::kinematics::{GratingSpec, MoleculeSpecies};
use crate::num::Real;

pub const DEFAULT_SAMPLE_COUNT: usize = 8192;
pub const DEFAULT_N_MAX: usize = 40;
/// Phase beyond which the slit is treated as absorbing, rad.
pub const DEFAULT_CUTOFF_PHASE: f64 = 20.0 * std::f64::consts::PI;

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];
/// Largest phase excursion integrated by one Gauss-Legendre panel.
const PANEL_PHASE: f64 = 0.25;
const MAX_PANELS: usize = 1 << 14;

/// Prefactor `C3 b / (ħ v)` of the wall phase, m³.
pub fn phase_strength<T: Real>(species: &MoleculeSpecies<T>, grating: &GratingSpec<T>, v: T) -> T {
    species.c3_over_hbar() * grating.thickness / v
}

/// Eikonal wall phase at position `x` measured from the left wall of the slit.
pub fn wall_phase<T: Real>(
    species: &MoleculeSpecies<T>,
    grating: &GratingSpec<T>,
    v: T,
    x: T,
) -> Result<T> {
    if !(v > T::zero()) {
        return Err(domain(format!("speed must be positive, got {v}")));
    }
    let w = grating.slit_width();
    if !(x > T::zero() && x < w) {
        return Err(domain(format!(
            "position {x} lies outside the open slit (0, {w})"
        )));
    }
    Ok(phase_at(phase_strength(species, grating, v), w, x))
}

#[inline]
fn phase_at<T: Real>(strength: T, w: T, x: T) -> T {
    let r = w - x;
    strength * (T::one() / (x * x * x) + T::one() / (r * r * r))
}

/// Distance from each wall at which the wall phase reaches `cutoff_phase`.
///
/// Returns zero for a non-interacting species. Fails with
/// [`Error::DegenerateSlit`] when even the slit centre exceeds the cutoff.
pub fn wall_margin<T: Real>(
    species: &MoleculeSpecies<T>,
    grating: &GratingSpec<T>,
    v: T,
    cutoff_phase: T,
) -> Result<T> {
    if !(v > T::zero()) {
        return Err(domain(format!("speed must be positive, got {v}")));
    }
    if !(cutoff_phase > T::zero()) {
        return Err(domain(format!(
            "cutoff phase must be positive, got {cutoff_phase}"
        )));
    }
    let k = phase_strength(species, grating, v);
    if k == T::zero() {
        return Ok(T::zero());
    }
    let w = grating.slit_width();
    let half = w / T::of(2.0);
    if phase_at(k, w, half) >= cutoff_phase {
        return Err(Error::DegenerateSlit {
            margin: half.as_f64(),
            width: w.as_f64(),
        });
    }
    // φ decreases monotonically on (0, w/2]
    let mut lo = T::zero();
    let mut hi = half;
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if phase_at(k, w, mid) > cutoff_phase {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// One period of a grating's complex transmission, sampled as cell averages.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionProfile<T> {
    /// Cell averages of t(x).
    pub amplitude: Vec<Complex<T>>,
    /// Cell averages of |t(x)|², i.e. the covered open fraction of each cell.
    pub intensity: Vec<T>,
    pub period: T,
    pub slit_width: T,
    /// Absorbing zone next to each wall, m.
    pub wall_margin: T,
    /// Prefactor of the wall phase used to build the profile, m³.
    pub phase_strength: T,
}

impl<T: Real> TransmissionProfile<T> {
    pub fn sample_count(&self) -> usize {
        self.amplitude.len()
    }

    pub fn cell_width(&self) -> T {
        self.period / T::of_usize(self.sample_count())
    }

    /// Mean of |t|² over the period.
    pub fn open_area(&self) -> T {
        let open = self.slit_width - T::of(2.0) * self.wall_margin;
        open / self.period
    }

    /// Phase advance per cell at the inner edge of the wall margin, rad.
    ///
    /// Values above π mean the wall phase aliases on this grid.
    pub fn edge_phase_step(&self) -> T {
        if self.phase_strength == T::zero() {
            return T::zero();
        }
        let x = if self.wall_margin > T::zero() {
            self.wall_margin
        } else {
            self.cell_width()
        };
        let slope = phase_slope(self.phase_strength, self.slit_width, x).abs();
        slope * self.cell_width()
    }
}

/// dφ/dx.
#[inline]
pub(crate) fn phase_slope<T: Real>(strength: T, w: T, x: T) -> T {
    let r = w - x;
    let three = T::of(3.0);
    strength * three * (T::one() / (r * r * r * r) - T::one() / (x * x * x * x))
}

/// Discretises `t(x) = 1_open(x) · exp(i φ(x))` over one period.
pub fn build_transmission<T: Real>(
    species: &MoleculeSpecies<T>,
    grating: &GratingSpec<T>,
    v: T,
    sample_count: usize,
    wall_margin: T,
) -> Result<TransmissionProfile<T>> {
    if sample_count < 16 {
        return Err(domain(format!(
            "sample_count must be at least 16, got {sample_count}"
        )));
    }
    if !(v > T::zero()) {
        return Err(domain(format!("speed must be positive, got {v}")));
    }
    let w = grating.slit_width();
    if !(wall_margin >= T::zero()) || wall_margin >= w / T::of(2.0) {
        return Err(Error::DegenerateSlit {
            margin: wall_margin.as_f64(),
            width: w.as_f64(),
        });
    }
    let strength = phase_strength(species, grating, v);
    let open_lo = wall_margin;
    let open_hi = w - wall_margin;
    let dx = grating.period / T::of_usize(sample_count);

    let mut amplitude = Vec::with_capacity(sample_count);
    let mut intensity = Vec::with_capacity(sample_count);
    for k in 0..sample_count {
        let lo = T::of_usize(k) * dx;
        let hi = T::of_usize(k + 1) * dx;
        let a = lo.max(open_lo);
        let b = hi.min(open_hi);
        if b <= a {
            amplitude.push(Complex::new(T::zero(), T::zero()));
            intensity.push(T::zero());
            continue;
        }
        let covered = (b - a) / dx;
        intensity.push(covered);
        if strength == T::zero() {
            amplitude.push(Complex::new(covered, T::zero()));
        } else {
            amplitude.push(phase_cell_integral(strength, w, a, b) / dx);
        }
    }
    Ok(TransmissionProfile {
        amplitude,
        intensity,
        period: grating.period,
        slit_width: w,
        wall_margin,
        phase_strength: strength,
    })
}

/// ∫_a^b exp(i φ(x)) dx with panels fine enough to follow the phase.
fn phase_cell_integral<T: Real>(strength: T, w: T, a: T, b: T) -> Complex<T> {
    let three = T::of(3.0);
    let left = T::one() / (a * a * a * a);
    let r = w - b;
    let right = T::one() / (r * r * r * r);
    let max_slope = three * strength * (left + right);
    let excursion = (max_slope * (b - a)).as_f64();
    let panels = ((excursion / PANEL_PHASE).ceil() as usize).clamp(1, MAX_PANELS);
    let h = (b - a) / T::of_usize(panels);
    let half = h / T::of(2.0);
    let mut acc = Complex::new(T::zero(), T::zero());
    for p in 0..panels {
        let mid = a + (T::of_usize(p) + T::of(0.5)) * h;
        for (node, weight) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            let x = mid + half * T::of(*node);
            let phi = phase_at(strength, w, x);
            acc = acc + Complex::new(phi.cos(), phi.sin()) * (half * T::of(*weight));
        }
    }
    acc
}

/// Fourier coefficients of t (`b_n`) and of |t|² (`A_n`) for |n| ≤ `order_max`.
///
/// Convention: `c_n = (1/g) ∫ f(x) exp(−2πi n x / g) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients<T> {
    pub order_max: usize,
    /// `b_n` stored at index `n + order_max`.
    pub amplitude: Vec<Complex<T>>,
    /// `A_n` stored at index `n + order_max`.
    pub intensity: Vec<Complex<T>>,
}

impl<T: Real> FourierCoefficients<T> {
    pub fn b(&self, n: isize) -> Complex<T> {
        self.get(&self.amplitude, n)
    }

    pub fn a(&self, n: isize) -> Complex<T> {
        self.get(&self.intensity, n)
    }

    fn get(&self, v: &[Complex<T>], n: isize) -> Complex<T> {
        let m = self.order_max as isize;
        if n.abs() > m {
            return Complex::new(T::zero(), T::zero());
        }
        v[(n + m) as usize]
    }
}

pub(crate) fn forward_dft<T: Real>(data: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = data.to_vec();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub(crate) fn inverse_dft<T: Real>(data: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = data.to_vec();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = T::one() / T::of_usize(buf.len());
    buf.iter_mut().for_each(|c| *c = *c * scale);
    buf
}

/// Continuous-transform coefficients from cell averages: divides out the box
/// filter `exp(iπn/N) sinc(πn/N)` of the cell averaging.
fn deconvolved<T: Real>(spectrum: &[Complex<T>], n_max: usize) -> Vec<Complex<T>> {
    let len = spectrum.len();
    let nn = T::of_usize(len);
    let pi = T::PI();
    (-(n_max as isize)..=n_max as isize)
        .map(|n| {
            let idx = if n < 0 {
                (len as isize + n) as usize
            } else {
                n as usize
            };
            let raw = spectrum[idx] / nn;
            if n == 0 {
                return raw;
            }
            let arg = pi * T::of(n as f64) / nn;
            let sinc = arg.sin() / arg;
            let shift = Complex::new(arg.cos(), -arg.sin());
            raw * shift / sinc
        })
        .collect()
}

pub fn fourier_coefficients<T: Real>(
    profile: &TransmissionProfile<T>,
    n_max: usize,
) -> Result<FourierCoefficients<T>> {
    let n = profile.sample_count();
    if n_max < 1 {
        return Err(domain("n_max must be at least 1"));
    }
    if n_max >= n / 2 {
        return Err(Error::Aliasing {
            n_max,
            sample_count: n,
        });
    }
    let amp = forward_dft(&profile.amplitude);
    let inten: Vec<Complex<T>> = profile
        .intensity
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .collect();
    let inten = forward_dft(&inten);
    let mut intensity = deconvolved(&inten, n_max);
    // A_0 is real and A_{-n} = conj(A_n) by construction; enforce it exactly.
    for k in 1..=n_max {
        let pos = intensity[n_max + k];
        intensity[n_max - k] = pos.conj();
    }
    intensity[n_max].im = T::zero();
    Ok(FourierCoefficients {
        order_max: n_max,
        amplitude: deconvolved(&amp, n_max),
        intensity,
    })
}

/// Largest order `fourier_coefficients` accepts for this profile.
pub fn max_order<T: Real>(profile: &TransmissionProfile<T>) -> usize {
    profile.sample_count() / 2 - 1
}

/// Exact coefficient of an ideal top-hat `[0, f g)`: `f sinc(π n f) exp(−iπ n f)`.
pub fn top_hat_coefficient<T: Real>(open_fraction: T, n: isize) -> Complex<T> {
    if n == 0 {
        return Complex::new(open_fraction, T::zero());
    }
    let arg = T::PI() * T::of(n as f64) * open_fraction;
    let mag = arg.sin() / (T::PI() * T::of(n as f64));
    Complex::new(arg.cos(), -arg.sin()) * mag
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tpp(c3: f64) -> MoleculeSpecies<f64> {
        MoleculeSpecies::tpp().with_c3(c3)
    }

    #[test]
    fn no_interaction_no_phase() {
        let g = GratingSpec::<f64>::paper();
        for x in [1e-9, 100e-9, 400e-9] {
            assert_eq!(wall_phase(&tpp(0.0), &g, 160.0, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn phase_is_symmetric_about_slit_centre() {
        let g = GratingSpec::<f64>::paper();
        let s = tpp(7.0);
        let w = g.slit_width();
        for x in [3e-9, 50e-9, 0.3 * w] {
            let a = wall_phase(&s, &g, 160.0, x).unwrap();
            let b = wall_phase(&s, &g, 160.0, w - x).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn phase_at_slit_centre_matches_high_precision_value() {
        // mpmath at 40 digits: 0.0070512352836340394972
        let g = GratingSpec::<f64>::paper();
        let w = g.slit_width();
        let phi = wall_phase(&tpp(10.0), &g, 160.0, w / 2.0).unwrap();
        assert_relative_eq!(phi, 0.007_051_235_283_634_039_5, max_relative = 1e-10);
    }

    #[test]
    fn phase_outside_slit_is_rejected() {
        let g = GratingSpec::<f64>::paper();
        let w = g.slit_width();
        assert!(wall_phase(&tpp(1.0), &g, 160.0, 0.0).is_err());
        assert!(wall_phase(&tpp(1.0), &g, 160.0, w).is_err());
        assert!(wall_phase(&tpp(1.0), &g, 160.0, w + 1e-9).is_err());
        assert!(wall_phase(&tpp(1.0), &g, 0.0, w / 2.0).is_err());
    }

    #[test]
    fn margin_hits_the_cutoff() {
        let g = GratingSpec::<f64>::paper();
        let s = tpp(10.0);
        let m = wall_margin(&s, &g, 160.0, DEFAULT_CUTOFF_PHASE).unwrap();
        let phi = wall_phase(&s, &g, 160.0, m).unwrap();
        assert_relative_eq!(phi, DEFAULT_CUTOFF_PHASE, max_relative = 1e-9);
        assert_eq!(
            wall_margin(&tpp(0.0), &g, 160.0, DEFAULT_CUTOFF_PHASE).unwrap(),
            0.0
        );
        // absurd interaction: the whole slit exceeds the cutoff
        assert!(matches!(
            wall_margin(&tpp(1e9), &g, 160.0, DEFAULT_CUTOFF_PHASE),
            Err(Error::DegenerateSlit { .. })
        ));
    }

    #[test]
    fn binary_profile_counts() {
        let g = GratingSpec::<f64>::paper();
        let n = 1000;
        let p = build_transmission(&tpp(0.0), &g, 160.0, n, 0.0).unwrap();
        let nonzero = p.amplitude.iter().filter(|c| c.norm() > 0.0).count();
        let full = p
            .amplitude
            .iter()
            .filter(|c| (c.norm() - 1.0).abs() < 1e-12)
            .count();
        assert_eq!(nonzero, (0.48 * n as f64).ceil() as usize);
        // 0.48 * 1000 is integral up to rounding; either way only one edge cell can be partial
        assert!(full + 1 >= nonzero);
        let mean: f64 = p.intensity.iter().sum::<f64>() / n as f64;
        assert_relative_eq!(mean, 0.48, max_relative = 1e-12);

        let p = build_transmission(&tpp(0.0), &g, 160.0, 1024, 0.0).unwrap();
        let nonzero = p.amplitude.iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(nonzero, (0.48f64 * 1024.0).ceil() as usize);
    }

    #[test]
    fn nearly_open_grating_is_all_ones() {
        let g = GratingSpec::new(991.3e-9, 1.0 - 1e-12, 500e-9).unwrap();
        let p = build_transmission(&tpp(0.0), &g, 160.0, 256, 0.0).unwrap();
        for c in &p.amplitude {
            assert!((c.re - 1.0).abs() < 1e-8 && c.im == 0.0);
        }
    }

    #[test]
    fn interaction_keeps_unit_modulus_inside_the_slit() {
        let g = GratingSpec::<f64>::paper();
        let s = tpp(10.0);
        let m = wall_margin(&s, &g, 160.0, DEFAULT_CUTOFF_PHASE).unwrap();
        // point samples of t(x) have modulus 0 or 1; cell averages never exceed 1
        let p = build_transmission(&s, &g, 160.0, 4096, m).unwrap();
        for (c, i) in p.amplitude.iter().zip(&p.intensity) {
            assert!(c.norm() <= *i + 1e-12);
            assert!(*i >= 0.0 && *i <= 1.0 + 1e-12, "{i}");
        }
    }

    #[test]
    fn degenerate_margin_is_rejected() {
        let g = GratingSpec::<f64>::paper();
        let w = g.slit_width();
        assert!(matches!(
            build_transmission(&tpp(0.0), &g, 160.0, 1024, w / 2.0),
            Err(Error::DegenerateSlit { .. })
        ));
        assert!(build_transmission(&tpp(0.0), &g, 160.0, 8, 0.0).is_err());
    }

    #[test]
    fn zeroth_coefficient_is_open_fraction() {
        let g = GratingSpec::<f64>::paper();
        let p = build_transmission(&tpp(0.0), &g, 160.0, 8192, 0.0).unwrap();
        let c = fourier_coefficients(&p, 40).unwrap();
        assert!((c.b(0).re - 0.48).abs() < 1e-6);
        assert!(c.b(0).im.abs() < 1e-12);
        assert!((c.a(0).re - 0.48).abs() < 1e-12);
    }

    #[test]
    fn half_open_square_aperture() {
        // analytic: b_n = f sinc(π n f), |b_1| = 1/π, b_2 = 0
        let g = GratingSpec::new(991.3e-9, 0.5, 500e-9).unwrap();
        let p = build_transmission(&tpp(0.0), &g, 160.0, 8192, 0.0).unwrap();
        let c = fourier_coefficients(&p, 40).unwrap();
        assert!((c.b(1).norm() - 1.0 / std::f64::consts::PI).abs() < 1e-6);
        assert!(c.b(2).norm() < 1e-6);
        for n in -40..=40 {
            let exact = top_hat_coefficient(0.5, n);
            assert!((c.b(n) - exact).norm() < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn intensity_mean_accounts_for_margin() {
        let g = GratingSpec::<f64>::paper();
        let margin = 12.345e-9;
        let p = build_transmission(&tpp(4.0), &g, 160.0, 8192, margin).unwrap();
        let c = fourier_coefficients(&p, 10).unwrap();
        let expected = 0.48 - 2.0 * margin / g.period;
        assert_relative_eq!(c.a(0).re, expected, max_relative = 1e-10);
        assert_relative_eq!(p.open_area(), expected, max_relative = 1e-12);
    }

    #[test]
    fn conjugate_symmetry() {
        let g = GratingSpec::<f64>::paper();
        let p0 = build_transmission(&tpp(0.0), &g, 160.0, 4096, 0.0).unwrap();
        let c0 = fourier_coefficients(&p0, 20).unwrap();
        // real, but not even about x = 0: b_{-n} = conj(b_n)
        for n in 1..=20 {
            assert!((c0.b(-n) - c0.b(n).conj()).norm() < 1e-12);
            assert!((c0.a(-n) - c0.a(n).conj()).norm() < 1e-15);
        }
        let s = tpp(10.0);
        let m = wall_margin(&s, &g, 160.0, DEFAULT_CUTOFF_PHASE).unwrap();
        let p = build_transmission(&s, &g, 160.0, 4096, m).unwrap();
        let c = fourier_coefficients(&p, 20).unwrap();
        assert!((c.b(-1) - c.b(1).conj()).norm() > 1e-4);
    }

    #[test]
    fn aliasing_guard() {
        let g = GratingSpec::<f64>::paper();
        let p = build_transmission(&tpp(0.0), &g, 160.0, 64, 0.0).unwrap();
        assert!(matches!(
            fourier_coefficients(&p, 32),
            Err(Error::Aliasing { .. })
        ));
        assert!(fourier_coefficients(&p, 0).is_err());
        assert!(fourier_coefficients(&p, 31).is_ok());
    }

    #[test]
    fn parseval_converges_from_below() {
        let g = GratingSpec::<f64>::paper();
        let p = build_transmission(&tpp(0.0), &g, 160.0, 8192, 0.0).unwrap();
        let mean_sq: f64 = p.intensity.iter().sum::<f64>() / 8192.0;
        let mut last = 0.0;
        for n_max in [5usize, 40, 400, 1000] {
            let c = fourier_coefficients(&p, n_max).unwrap();
            let s: f64 = c.amplitude.iter().map(|b| b.norm_sqr()).sum();
            assert!(s > last);
            assert!(s <= mean_sq + 1e-9, "n_max {n_max}: {s} > {mean_sq}");
            last = s;
        }
        assert!(mean_sq - last < 1e-3);
    }

    #[test]
    fn phase_only_interaction_preserves_intensity_coefficients() {
        let g = GratingSpec::<f64>::paper();
        let m = 9e-9;
        let a = fourier_coefficients(
            &build_transmission(&tpp(0.0), &g, 160.0, 4096, m).unwrap(),
            30,
        )
        .unwrap();
        let b = fourier_coefficients(
            &build_transmission(&tpp(12.0), &g, 160.0, 4096, m).unwrap(),
            30,
        )
        .unwrap();
        assert_eq!(a.intensity, b.intensity);
    }
}
