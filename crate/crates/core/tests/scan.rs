use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use talbot_core::scan::{
    fit_scan, generate_scan_ensemble, noise_floor, pair_records, pooled_noise, rank_and_select,
    reduce_records, RateScan, ScanKind,
};
use talbot_core::*;

const G: f64 = 991.3e-9;
const STEP: f64 = 40e-9;
const SPAN: f64 = 3e-6;
const FRACTIONS: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0];

fn ensemble(period: f64, vis: f64, drift: &DriftModel, dwell: f64, seed: u64) -> Vec<ScanRecord> {
    let truth = FringePattern::sinusoid(period, 1.0, vis, 0.0, 64);
    generate_scan_ensemble(&truth, 30.0, drift, 68, STEP, SPAN, dwell, seed).unwrap()
}

#[test]
fn selection_is_period_blind() {
    let drift = DriftModel::c60f48_like(200e-9, 100e-9);
    for period in [G, 0.8 * G] {
        let red = reduce_records(
            &ensemble(period, 0.27, &drift, 60.0, 11),
            &FRACTIONS,
            200,
            3,
        )
        .unwrap();
        let bin = period * period / SPAN;
        assert!(
            (red.period - period).abs() < bin,
            "{} vs {period}",
            red.period
        );
        assert!(
            (red.period - period).abs() < 0.01 * period,
            "{} vs {period}",
            red.period
        );
        let v04 = red.table[3].visibility;
        assert!((v04 - 0.27).abs() < 0.04, "period {period}: {v04}");
        assert!(red.table[6].visibility < v04);
    }
}

fn white_noise_chi2(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 5.0).unwrap();
    let positions: Vec<f64> = (0..75).map(|j| j as f64 * STEP).collect();
    let mut chi2: Vec<f64> = (0..count)
        .map(|i| {
            let scan = RateScan {
                positions: positions.clone(),
                rates: positions
                    .iter()
                    .map(|_| 100.0 + noise.sample(&mut rng))
                    .collect(),
                timestamp_index: i,
            };
            fit_scan(&scan, None).unwrap().chi2
        })
        .collect();
    chi2.sort_by(|a, b| a.total_cmp(b));
    chi2
}

#[test]
fn white_noise_chi2_band() {
    let chi2 = white_noise_chi2(1000, 5);
    let q = |p: f64| chi2[(p * (chi2.len() - 1) as f64).round() as usize];
    let (q10, q50, q90) = (q(0.1), q(0.5), q(0.9));
    println!("white-noise chi2 quantiles: {q10:.4} {q50:.4} {q90:.4}");
    assert!(q10 > 1.0, "white noise must not look like a clean fringe");
    for (got, frozen) in [(q10, Q10), (q50, Q50), (q90, Q90)] {
        assert!(
            (got / frozen - 1.0).abs() < 0.08,
            "{got} vs frozen {frozen}"
        );
    }
    // scale invariance of the band
    let positions: Vec<f64> = (0..75).map(|j| j as f64 * STEP).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 5.0).unwrap();
    let rates: Vec<f64> = positions
        .iter()
        .map(|_| 100.0 + noise.sample(&mut rng))
        .collect();
    let a = RateScan {
        positions: positions.clone(),
        rates: rates.clone(),
        timestamp_index: 0,
    };
    let b = RateScan {
        positions,
        rates: rates.iter().map(|r| 7.5 * r).collect(),
        timestamp_index: 0,
    };
    let (fa, fb) = (fit_scan(&a, None).unwrap(), fit_scan(&b, None).unwrap());
    assert!((fa.chi2 - fb.chi2).abs() < 1e-9 * fa.chi2);
}

// 1000 white-noise scans of 75 points, seed 5
const Q10: f64 = 4.929;
const Q50: f64 = 7.301;
const Q90: f64 = 10.364;

#[test]
fn aligned_average_is_unbiased_at_full_selection() {
    // per-scan jumps only, flat background: all scans are statistically alike
    let mut drift = DriftModel::c60f48_like(300e-9, 0.0);
    drift.background_rate_end = drift.background_rate_start;
    let mut sum = 0.0;
    let n = 50;
    for e in 0..n {
        let red =
            reduce_records(&ensemble(G, 0.27, &drift, 60.0, 500 + e), &[1.0], 200, e).unwrap();
        sum += red.table[0].visibility;
    }
    let mean = sum / n as f64;
    println!("mean visibility at R = 1 over {n} ensembles: {mean:.4}");
    assert!((mean - 0.27).abs() < 0.01, "{mean}");
}

#[test]
fn pure_background_stays_at_the_noise_floor() {
    let drift = DriftModel::c60f48_like(200e-9, 100e-9);
    let mut passes = 0;
    for e in 0..5u64 {
        let red =
            reduce_records(&ensemble(G, 0.0, &drift, 60.0, 700 + e), &FRACTIONS, 200, e).unwrap();
        let sigma = pooled_noise(&red.scans, &red.fits);
        let offset = red.fits.iter().map(|f| f.offset).sum::<f64>() / red.fits.len() as f64;
        let n = red.scans[0].positions.len();
        let ok = [(3usize, 0.4), (6, 1.0)].iter().all(|&(i, r)| {
            let floor = noise_floor(
                sigma,
                n,
                offset,
                red.scans.len(),
                r,
                scan::candidate_frequencies(n),
            )
            .unwrap();
            red.table[i].visibility <= floor.visibility + 3.0 * floor.sd
        });
        passes += ok as usize;
    }
    assert!(passes >= 4, "{passes}/5");
}

fn corrected_background_mean(drift: &DriftModel, seed: u64) -> (f64, f64) {
    let truth = FringePattern::sinusoid(G, 1.0, 0.0, 0.0, 64);
    let records = generate_scan_ensemble(&truth, 0.0, drift, 68, STEP, SPAN, 60.0, seed).unwrap();
    assert!(records
        .iter()
        .step_by(2)
        .all(|r| r.kind == ScanKind::Signal));
    let scans = pair_records(&records).unwrap();
    let all: Vec<f64> = scans.iter().flat_map(|s| s.rates.iter().cloned()).collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let sd = (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (all.len() - 1) as f64).sqrt();
    (mean, sd / (all.len() as f64).sqrt())
}

#[test]
fn background_subtraction_leaves_zero_mean() {
    let mut flat = DriftModel::c60f48_like(0.0, 0.0);
    flat.background_rate_end = flat.background_rate_start;
    let (mean, se) = corrected_background_mean(&flat, 31);
    assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    // a rising background leaves the one-record lag of the following background scan
    let ramp = DriftModel::c60f48_like(0.0, 0.0);
    let lag = (ramp.background_rate_end - ramp.background_rate_start) / 67.0;
    let (mean, se) = corrected_background_mean(&ramp, 31);
    assert!(
        (mean + lag).abs() < 3.0 * se,
        "mean {mean} lag {lag} se {se}"
    );
}

#[test]
fn bootstrap_error_grows_with_few_scans() {
    let drift = DriftModel::c60f48_like(200e-9, 100e-9);
    let (mut small, mut large) = (0.0, 0.0);
    for e in 0..5u64 {
        let red = reduce_records(
            &ensemble(G, 0.27, &drift, 60.0, 900 + e),
            &[0.1, 0.5],
            200,
            e,
        )
        .unwrap();
        small += red.table[0].error;
        large += red.table[1].error;
    }
    assert!(small > large, "{small} vs {large}");
}

#[test]
fn ranking_keeps_the_cleanest_scans() {
    let drift = DriftModel::c60f48_like(200e-9, 100e-9);
    let red = reduce_records(&ensemble(G, 0.27, &drift, 60.0, 77), &[1.0], 200, 1).unwrap();
    let order = rank_and_select(&red.fits, 0.4).unwrap();
    assert_eq!(
        order.len(),
        (0.4f64 * red.fits.len() as f64).ceil() as usize
    );
    let worst_kept = order.iter().map(|&i| red.fits[i].chi2).fold(0.0, f64::max);
    let dropped = (0..red.fits.len()).filter(|i| !order.contains(i));
    assert!(dropped.into_iter().all(|i| red.fits[i].chi2 >= worst_kept));
}
