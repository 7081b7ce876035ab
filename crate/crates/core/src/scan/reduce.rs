use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{pair_records, RateScan, ScanRecord};
use crate::error::{domain, Error, Result};
use crate::fit::fit_sine;
use crate::grating::forward_dft;
use crate::num::{mix_seed, Real};

/// Sine fit of one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanFit<T> {
    /// counts/s, ≥ 0
    pub amplitude: T,
    pub offset: T,
    pub phase: T,
    /// m
    pub period: T,
    /// Residual power over the power of the fitted sine.
    pub chi2: T,
    pub visibility: T,
    /// False when the offset is not positive; such fits rank last.
    pub usable: bool,
    pub timestamp_index: usize,
}

const MIN_BIN: usize = 2;
const COARSE_POINTS: usize = 41;
const GOLDEN_ITERATIONS: usize = 80;

fn centred_power<T: Real>(rates: &[T]) -> Vec<f64> {
    let n = rates.len();
    let mean = rates.iter().map(|r| r.as_f64()).sum::<f64>() / n as f64;
    let data: Vec<Complex<f64>> = rates
        .iter()
        .map(|r| Complex::new(r.as_f64() - mean, 0.0))
        .collect();
    forward_dft(&data)
        .iter()
        .take(n / 2 + 1)
        .map(|c| c.norm_sqr())
        .collect()
}

fn dominant_bin(power: &[f64]) -> Result<usize> {
    if power.len() <= MIN_BIN {
        return Err(domain("scan is too short to hold two periods"));
    }
    let mut best = MIN_BIN;
    for k in MIN_BIN..power.len() {
        if power[k] > power[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Minimises `cost(f)` over frequency `f` (cycles per span) near bin `k`:
/// a coarse scan over `[k − 1, k + 1]` followed by golden-section refinement.
fn refine_frequency(k: usize, max_bin: usize, cost: impl Fn(f64) -> f64) -> f64 {
    let lo = (k as f64 - 1.0).max(MIN_BIN as f64);
    let hi = (k as f64 + 1.0).min(max_bin as f64);
    let h = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let (mut best, mut best_cost) = (k as f64, cost(k as f64));
    for i in 0..COARSE_POINTS {
        let f = lo + h * i as f64;
        let c = cost(f);
        if c < best_cost {
            best = f;
            best_cost = c;
        }
    }
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut c1, mut c2) = (cost(x1), cost(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if c1 < c2 {
            b = x2;
            x2 = x1;
            c2 = c1;
            x1 = b - ratio * (b - a);
            c1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            c1 = c2;
            x2 = a + ratio * (b - a);
            c2 = cost(x2);
        }
        if b - a < 1e-13 * b {
            break;
        }
    }
    let mid = (a + b) / 2.0;
    if cost(mid) <= best_cost {
        mid
    } else {
        best
    }
}

fn rss_at<T: Real>(scan: &RateScan<T>, period: f64) -> f64 {
    fit_sine(&scan.positions, &scan.rates, T::of(period))
        .map(|f| f.rss.as_f64())
        .unwrap_or(f64::INFINITY)
}

/// Fits `offset + amplitude · sin(2π s/period + phase)` to a scan.
///
/// Without a hint the period comes from the strongest non-zero spatial
/// frequency, refined by least squares; no particular period is assumed.
pub fn fit_scan<T: Real>(scan: &RateScan<T>, period_hint: Option<T>) -> Result<ScanFit<T>> {
    if scan.positions.len() != scan.rates.len() {
        return Err(domain("positions and rates differ in length"));
    }
    super::check_grid(&scan.positions)?;
    let span = scan.span().as_f64();
    let period = match period_hint {
        Some(p) => {
            if !(p > T::zero()) {
                return Err(domain(format!("period hint must be positive, got {p}")));
            }
            if span < 2.0 * p.as_f64() * (1.0 - 1e-9) {
                return Err(domain(
                    "scan holds fewer than two periods of the hinted period",
                ));
            }
            p.as_f64()
        }
        None => {
            let power = centred_power(&scan.rates);
            let k = dominant_bin(&power)?;
            let f = refine_frequency(k, power.len() - 1, |f| rss_at(scan, span / f));
            span / f
        }
    };
    let fit = fit_sine(&scan.positions, &scan.rates, T::of(period))?;
    let n = T::of_usize(scan.rates.len());
    let usable = fit.offset > T::zero() && fit.offset.is_finite() && fit.amplitude.is_finite();
    let sine_power = n * fit.amplitude * fit.amplitude / T::of(2.0);
    let chi2 = if !usable || sine_power == T::zero() {
        T::infinity()
    } else {
        fit.rss / sine_power
    };
    Ok(ScanFit {
        amplitude: fit.amplitude,
        offset: fit.offset,
        phase: fit.phase,
        period: T::of(period),
        chi2,
        visibility: if usable {
            fit.amplitude / fit.offset
        } else {
            T::zero()
        },
        usable,
        timestamp_index: scan.timestamp_index,
    })
}

/// Indices of the `⌈R·N⌉` fits with the lowest chi2, ties broken by timestamp.
pub fn rank_and_select<T: Real>(fits: &[ScanFit<T>], fraction: T) -> Result<Vec<usize>> {
    if fits.is_empty() {
        return Err(domain("no fits to rank"));
    }
    if !(fraction > T::zero() && fraction <= T::one()) {
        return Err(domain(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..fits.len()).collect();
    let key = |f: &ScanFit<T>| {
        if f.usable && !f.chi2.is_nan() {
            f.chi2.as_f64()
        } else {
            f64::INFINITY
        }
    };
    order.sort_by(|&a, &b| {
        key(&fits[a])
            .total_cmp(&key(&fits[b]))
            .then(fits[a].timestamp_index.cmp(&fits[b].timestamp_index))
    });
    let keep = ((fraction.as_f64() * fits.len() as f64) - 1e-9)
        .ceil()
        .max(1.0) as usize;
    order.truncate(keep.min(fits.len()));
    Ok(order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aligned<T> {
    pub combined: RateScan<T>,
    pub fit: ScanFit<T>,
    /// Shift applied to each input scan, m.
    pub shifts: Vec<T>,
}

/// The scan with its fitted harmonic moved to zero phase. The residual about
/// the fit is kept as it is, so the fit of the result has the same offset,
/// amplitude and residual.
fn rotate_to_zero_phase<T: Real>(scan: &RateScan<T>, fit: &ScanFit<T>) -> Vec<T> {
    let k = std::f64::consts::TAU / fit.period.as_f64();
    let (a, c, phi) = (
        fit.offset.as_f64(),
        fit.amplitude.as_f64(),
        fit.phase.as_f64(),
    );
    scan.positions
        .iter()
        .zip(&scan.rates)
        .map(|(&s, &y)| {
            let arg = k * s.as_f64();
            let residual = y.as_f64() - a - c * (arg + phi).sin();
            T::of(a + c * arg.sin() + residual)
        })
        .collect()
}

/// Shifts every scan's fitted fringe by `phase/2π · period` to zero phase and
/// averages the scans pointwise.
pub fn align_and_average<T: Real>(
    scans: &[RateScan<T>],
    fits: &[ScanFit<T>],
) -> Result<Aligned<T>> {
    if scans.is_empty() || scans.len() != fits.len() {
        return Err(domain("need one fit per scan and at least one scan"));
    }
    let n = scans[0].positions.len();
    if scans
        .iter()
        .any(|s| s.positions.len() != n || !super::same_grid(&s.positions, &scans[0].positions))
    {
        return Err(Error::Pairing(
            "scans to align have different position grids".into(),
        ));
    }
    let (pmin, pmax) = fits.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), f| {
        (lo.min(f.period.as_f64()), hi.max(f.period.as_f64()))
    });
    if pmax > 1.05 * pmin {
        return Err(Error::MixedPeriod(format!(
            "fitted periods range from {pmin:.4e} m to {pmax:.4e} m"
        )));
    }
    if scans.len() == 1 {
        return Ok(Aligned {
            combined: scans[0].clone(),
            fit: fits[0],
            shifts: vec![T::zero()],
        });
    }
    let shifts: Vec<T> = fits.iter().map(|f| f.phase / T::TAU() * f.period).collect();
    let shifted: Vec<Vec<T>> = scans
        .iter()
        .zip(fits)
        .map(|(s, f)| rotate_to_zero_phase(s, f))
        .collect();
    let inv = 1.0 / scans.len() as f64;
    let rates: Vec<T> = (0..n)
        .map(|j| T::of(shifted.iter().map(|r| r[j].as_f64()).sum::<f64>() * inv))
        .collect();
    let combined = RateScan {
        positions: scans[0].positions.clone(),
        rates,
        timestamp_index: scans.iter().map(|s| s.timestamp_index).min().unwrap_or(0),
    };
    let period = T::of(fits.iter().map(|f| f.period.as_f64()).sum::<f64>() * inv);
    let fit = fit_scan(&combined, Some(period))?;
    Ok(Aligned {
        combined,
        fit,
        shifts,
    })
}

/// Period of the strongest spatial frequency common to all scans.
pub fn shared_period<T: Real>(scans: &[RateScan<T>]) -> Result<T> {
    if scans.is_empty() {
        return Err(domain("no scans"));
    }
    let mut power = centred_power(&scans[0].rates);
    for s in &scans[1..] {
        if s.rates.len() != scans[0].rates.len() {
            return Err(Error::Pairing("scans have different lengths".into()));
        }
        for (p, q) in power.iter_mut().zip(centred_power(&s.rates)) {
            *p += q;
        }
    }
    let k = dominant_bin(&power)?;
    let span = scans[0].span().as_f64();
    let f = refine_frequency(k, power.len() - 1, |f| {
        scans.iter().map(|s| rss_at(s, span / f)).sum()
    });
    Ok(T::of(span / f))
}

/// Visibility of the selected, aligned average at one selection fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RPoint<T> {
    pub fraction: T,
    pub selected: usize,
    pub visibility: T,
    /// Bootstrap standard deviation.
    pub error: T,
}

/// Visibility versus selection fraction with bootstrap errors.
///
/// Each fraction resamples its selected scans with replacement `bootstrap`
/// times; resample `b` of fraction `i` uses seed `mix_seed(mix_seed(seed, i), b)`.
pub fn visibility_vs_r<T: Real>(
    scans: &[RateScan<T>],
    fits: &[ScanFit<T>],
    fractions: &[T],
    bootstrap: usize,
    seed: u64,
) -> Result<Vec<RPoint<T>>> {
    if bootstrap < 200 {
        return Err(domain(format!(
            "at least 200 bootstrap resamples are needed, got {bootstrap}"
        )));
    }
    fractions
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let sel = rank_and_select(fits, r)?;
            let (s, f) = subset(scans, fits, &sel);
            let aligned = align_and_average(&s, &f)?;
            let base = mix_seed(seed, i as u64);
            let draws: Vec<f64> = (0..bootstrap)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(base, b as u64));
                    let pick: Vec<usize> = (0..sel.len())
                        .map(|_| sel[rng.random_range(0..sel.len())])
                        .collect();
                    let (s, f) = subset(scans, fits, &pick);
                    align_and_average(&s, &f).map(|a| a.fit.visibility.as_f64())
                })
                .collect::<Result<_>>()?;
            let mean = draws.iter().sum::<f64>() / bootstrap as f64;
            let var =
                draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (bootstrap - 1) as f64;
            Ok(RPoint {
                fraction: r,
                selected: sel.len(),
                visibility: aligned.fit.visibility,
                error: T::of(var.sqrt()),
            })
        })
        .collect()
}

fn subset<T: Real>(
    scans: &[RateScan<T>],
    fits: &[ScanFit<T>],
    pick: &[usize],
) -> (Vec<RateScan<T>>, Vec<ScanFit<T>>) {
    (
        pick.iter().map(|&i| scans[i].clone()).collect(),
        pick.iter().map(|&i| fits[i]).collect(),
    )
}

/// Expected visibility of aligned pure noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloor<T> {
    pub visibility: T,
    /// Standard deviation of the ensemble visibility.
    pub sd: T,
}

/// Visibility that alignment alone produces from noise of rms `sigma` per
/// position.
///
/// A sine fit to `n_points` noisy samples has a Rayleigh amplitude of scale
/// `σ_c = sigma·sqrt(2/n_points)`. When the shared period is the strongest of
/// `frequencies` candidate bins, the summed power of the `n_scans` fits is the
/// largest of that many χ² variables with `2 n_scans` degrees of freedom,
/// which inflates `σ_c²` by `E[max χ²] / 2 n_scans`. Ranking keeps the
/// `⌈R·N⌉` largest amplitudes and alignment averages them, so the floor is the
/// mean of the upper `R` tail of the Rayleigh law divided by the mean rate.
pub fn noise_floor<T: Real>(
    sigma: T,
    n_points: usize,
    offset: T,
    n_scans: usize,
    fraction: T,
    frequencies: usize,
) -> Result<NoiseFloor<T>> {
    if !(offset > T::zero())
        || n_points < 3
        || n_scans == 0
        || frequencies == 0
        || !(sigma >= T::zero())
    {
        return Err(domain(
            "noise floor needs a positive offset, three points, one scan and one frequency",
        ));
    }
    let r = fraction.as_f64();
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain(format!("fraction must lie in (0, 1], got {r}")));
    }
    let inflation = expected_max_chi2(n_scans, frequencies) / (2 * n_scans) as f64;
    let sc = sigma.as_f64() * (2.0 / n_points as f64 * inflation).sqrt();
    let cq = sc * (-2.0 * r.ln()).sqrt();
    let tail =
        cq * r + sc * (std::f64::consts::PI / 2.0).sqrt() * libm::erfc(cq / (sc * 2f64.sqrt()));
    let mean = if sc > 0.0 { tail / r } else { 0.0 };
    let second = cq * cq + 2.0 * sc * sc;
    let kept = ((r * n_scans as f64) - 1e-9).ceil().max(1.0);
    let sd = ((second - mean * mean).max(0.0) / kept).sqrt();
    let a = offset.as_f64();
    Ok(NoiseFloor {
        visibility: T::of(mean / a),
        sd: T::of(sd / a),
    })
}

/// CDF of χ² with `2k` degrees of freedom: `1 − e^{−x/2} Σ_{j<k} (x/2)^j / j!`.
fn chi2_even_cdf(k: usize, x: f64) -> f64 {
    let y = x / 2.0;
    let mut term = (-y).exp();
    let mut sum = 0.0;
    for j in 0..k {
        sum += term;
        term *= y / (j + 1) as f64;
    }
    (1.0 - sum).clamp(0.0, 1.0)
}

/// `E[max]` of `m` independent χ² variables with `2k` degrees of freedom.
fn expected_max_chi2(k: usize, m: usize) -> f64 {
    if m == 1 {
        return 2.0 * k as f64;
    }
    let dof = 2.0 * k as f64;
    let upper = dof + 40.0 * (2.0 * dof).sqrt() + 40.0;
    let steps = 20_000;
    let h = upper / steps as f64;
    // ∫ (1 − F^m) dx, trapezoidal
    let f = |x: f64| 1.0 - chi2_even_cdf(k, x).powi(m as i32);
    (0..=steps)
        .map(|i| {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * f(i as f64 * h)
        })
        .sum::<f64>()
        * h
}

/// Number of candidate bins searched for the shared period of `n_points`-long scans.
pub fn candidate_frequencies(n_points: usize) -> usize {
    (n_points / 2 + 1).saturating_sub(MIN_BIN).max(1)
}

/// Rms residual per position pooled over all fits.
pub fn pooled_noise<T: Real>(scans: &[RateScan<T>], fits: &[ScanFit<T>]) -> T {
    let rss: f64 = scans
        .iter()
        .zip(fits)
        .map(|(s, f)| {
            fit_sine(&s.positions, &s.rates, f.period)
                .map(|x| x.rss.as_f64())
                .unwrap_or(0.0)
        })
        .sum();
    let dof: usize = scans.iter().map(|s| s.rates.len().saturating_sub(3)).sum();
    T::of((rss / dof.max(1) as f64).sqrt())
}

/// Output of the full pipeline on a recorded ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction<T> {
    pub scans: Vec<RateScan<T>>,
    pub period: T,
    pub fits: Vec<ScanFit<T>>,
    pub table: Vec<RPoint<T>>,
}

/// Pairs, subtracts, fits at the shared period and tabulates visibility versus R.
pub fn reduce_records<T: Real>(
    records: &[ScanRecord<T>],
    fractions: &[T],
    bootstrap: usize,
    seed: u64,
) -> Result<Reduction<T>> {
    let scans = pair_records(records)?;
    let period = shared_period(&scans)?;
    let fits: Vec<ScanFit<T>> = scans
        .par_iter()
        .map(|s| fit_scan(s, Some(period)))
        .collect::<Result<_>>()?;
    let table = visibility_vs_r(&scans, &fits, fractions, bootstrap, seed)?;
    Ok(Reduction {
        scans,
        period,
        fits,
        table,
    })
}
