use num_complex::Complex;
use talbot_core::engine::fresnel_detector_intensity;
use talbot_core::grating::{build_transmission, fourier_coefficients};
use talbot_core::FringePattern;
use talbot_core::*;

const G: f64 = 991.3e-9;
const TPP_C3: f64 = 17.6547;

fn tpp_talbot(v: f64) -> f64 {
    talbot_length(
        G,
        de_broglie_wavelength(&MoleculeSpecies::tpp(), v).unwrap(),
    )
    .unwrap()
}

fn at_ratio(ratio: f64, c3: f64) -> InterferometerConfig {
    InterferometerConfig::symmetric(
        GratingSpec::paper(),
        ratio * tpp_talbot(160.0),
        MoleculeSpecies::tpp(),
    )
    .unwrap()
    .with_c3(c3)
}

fn oracle_settings(grid: usize) -> Settings {
    Settings {
        sample_count: grid,
        m_max: 31,
        shift_samples: 256,
        ..Settings::default()
    }
}

fn max_deviation(a: &FringePattern, b: &FringePattern) -> f64 {
    let s0 = a.mean();
    a.signal
        .iter()
        .zip(&b.signal)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / s0
}

fn vis(p: &FringePattern) -> f64 {
    visibility(p, VisibilityMode::SineFit).unwrap()
}

#[test]
fn closed_form_matches_propagation() {
    let grid = 16384;
    let s = oracle_settings(grid);
    for ratio in [0.3, 0.9, 1.5] {
        for c3 in [0.0, TPP_C3] {
            let cfg = at_ratio(ratio, c3);
            let a = quantum_pattern_coefficients(&cfg, 160.0, &s).unwrap();
            let b = quantum_pattern_fresnel(&cfg, 160.0, grid, grid, &s).unwrap();
            let d = max_deviation(&a, &b);
            assert!(d < 1e-3, "L/L_T {ratio}, c3 {c3}: {d:e}");
        }
    }
}

#[test]
fn closed_form_matches_propagation_across_speeds() {
    let grid = 16384;
    let s = oracle_settings(grid);
    let cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    for v in [120.0, 140.0, 160.0, 200.0, 235.0] {
        let a = quantum_pattern_coefficients(&cfg, v, &s).unwrap();
        let b = quantum_pattern_fresnel(&cfg, v, grid, grid, &s).unwrap();
        let d = max_deviation(&a, &b);
        assert!(d < 1e-3, "v {v}: {d:e}");
    }
}

#[test]
fn coarse_source_sampling_converges() {
    let grid = 8192;
    let s = oracle_settings(grid);
    let cfg = at_ratio(0.9, 0.0);
    let exact = quantum_pattern_coefficients(&cfg, 160.0, &s).unwrap();
    let coarse = max_deviation(
        &exact,
        &quantum_pattern_fresnel(&cfg, 160.0, 64, grid, &s).unwrap(),
    );
    let fine = max_deviation(
        &exact,
        &quantum_pattern_fresnel(&cfg, 160.0, 1024, grid, &s).unwrap(),
    );
    assert!(fine < coarse / 4.0, "{fine:e} vs {coarse:e}");
}

#[test]
fn asymmetric_propagation_reduces_to_symmetric() {
    // a tiny asymmetry must leave the pattern almost unchanged
    let grid = 8192;
    let s = oracle_settings(grid);
    let base = InterferometerConfig::tpp().with_c3(TPP_C3);
    let mut skew = base.clone();
    skew.l2 = base.l2 * (1.0 + 1e-6);
    let a = quantum_pattern_fresnel(&base, 160.0, 512, grid, &s).unwrap();
    let b = quantum_pattern_fresnel(&skew, 160.0, 512, grid, &s).unwrap();
    assert!(max_deviation(&a, &b) < 2e-3, "{:e}", max_deviation(&a, &b));
    assert!(matches!(
        quantum_pattern_coefficients(&skew, 160.0, &s),
        Err(Error::UnsupportedMethod(_))
    ));
}

#[test]
fn closed_form_at_one_talbot_length() {
    let gr = GratingSpec::new(G, 0.5, 5e-7).unwrap();
    let cfg =
        InterferometerConfig::symmetric(gr, tpp_talbot(160.0), MoleculeSpecies::tpp()).unwrap();
    let s = oracle_settings(16384);
    let a = quantum_pattern_coefficients(&cfg, 160.0, &s).unwrap();
    let b = quantum_pattern_fresnel(&cfg, 160.0, 16384, 16384, &s).unwrap();
    let va = visibility(&a, VisibilityMode::FirstHarmonic).unwrap();
    let vb = visibility(&b, VisibilityMode::FirstHarmonic).unwrap();
    assert!((va - vb).abs() < 1e-3, "{va} vs {vb}");
}

#[test]
fn open_grating_gives_flat_signal() {
    let gr = GratingSpec::new(G, 1.0 - 1e-9, 5e-7).unwrap();
    let cfg = InterferometerConfig::symmetric(gr, 0.22, MoleculeSpecies::tpp()).unwrap();
    let s = Settings::default();
    let p = quantum_pattern_fresnel(&cfg, 160.0, 64, 4096, &s).unwrap();
    assert!(visibility(&p, VisibilityMode::FirstHarmonic).unwrap() < 1e-6);
}

#[test]
fn incoherent_source_leaves_only_even_orders() {
    // the detector intensity is computed over 2g; harmonics of period 2g must vanish
    let grid = 8192;
    let s = Settings::default();
    for cfg in [at_ratio(0.9, 0.0), at_ratio(0.5, TPP_C3)] {
        let (intensity, _, _) = fresnel_detector_intensity(&cfg, 160.0, grid, grid, &s).unwrap();
        let n = intensity.len();
        let mean = intensity.iter().sum::<f64>() / n as f64;
        for k in [1usize, 3, 5, 7] {
            let c: Complex<f64> = intensity
                .iter()
                .enumerate()
                .map(|(q, &x)| {
                    x * Complex::from_polar(1.0, -std::f64::consts::TAU * (k * q) as f64 / n as f64)
                })
                .sum::<Complex<f64>>()
                / n as f64;
            assert!(c.norm() < 1e-3 * mean, "order {k}: {:e}", c.norm() / mean);
        }
    }
}

#[test]
fn quantum_tends_to_the_shadow_at_short_distance() {
    let s = Settings {
        sample_count: 16384,
        n_max: 4000,
        ..Settings::default()
    };
    let first = |p: &FringePattern| visibility(p, VisibilityMode::FirstHarmonic).unwrap();
    let c = first(&classical_shadow(&at_ratio(0.01, 0.0), &s).unwrap());
    let gap =
        |r: f64| first(&quantum_pattern_coefficients(&at_ratio(r, 0.0), 160.0, &s).unwrap()) - c;
    let gaps: Vec<f64> = [0.01, 0.003, 0.001].iter().map(|&r| gap(r)).collect();
    // the gap closes linearly in L/L_T
    assert!(gaps[2].abs() < 2.5e-3, "{gaps:?}");
    assert!(gaps[1].abs() < 0.01, "{gaps:?}");
    assert!((gaps[0] / gaps[2] - 10.0).abs() < 1.0, "{gaps:?}");
    // both quantum routes agree on the residual gap
    let cfg = at_ratio(0.01, 0.0);
    let f = first(&quantum_pattern_fresnel(&cfg, 160.0, 16384, 16384, &s).unwrap());
    assert!((f - c - gaps[0]).abs() < 1e-4, "{f} vs {}", gaps[0] + c);
}

#[test]
fn patterns_are_positive_and_periodic() {
    let s = Settings::default();
    let cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    let patterns = vec![
        quantum_pattern_coefficients(&cfg, 160.0, &s).unwrap(),
        quantum_pattern_fresnel(&cfg, 160.0, 256, 8192, &s).unwrap(),
        classical_pattern_mc(&cfg, 160.0, 1_000_000, 3, &s).unwrap(),
        classical_shadow(&cfg, &s).unwrap(),
    ];
    for p in &patterns {
        let s0 = p.mean();
        let floor = match &p.signal_error {
            Some(e) => e.iter().cloned().fold(0.0, f64::max) * 3.0,
            None => 1e-6 * s0,
        };
        assert!(p.signal.iter().all(|&x| x >= -floor), "{:?}", p.method);
        let step = p.period / p.shift_grid.len() as f64;
        assert!(
            (p.dominant_period() - G).abs() <= step,
            "{:?}: {}",
            p.method,
            p.dominant_period()
        );
        // S(0) agrees with the value one period later
        assert!((p.eval(0.0) - p.eval(p.period)).abs() < 1e-9 * s0);
        for m in 1..=p.m_max as isize {
            assert!((p.harmonic(-m) - p.harmonic(m).conj()).norm() < 1e-12 * s0);
        }
    }
}

#[test]
fn harmonic_and_sampled_averages_agree() {
    let s = Settings::default();
    let cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    let dist = VelocityDistribution::gaussian(160.0, 0.3, 41).unwrap();
    let avg = velocity_average(&dist, |v| quantum_pattern_coefficients(&cfg, v, &s)).unwrap();
    let mut sampled = vec![0.0; s.shift_samples];
    for (&v, &w) in dist.grid.iter().zip(&dist.weights) {
        let p = quantum_pattern_coefficients(&cfg, v, &s).unwrap();
        for (acc, x) in sampled.iter_mut().zip(&p.signal) {
            *acc += w * x;
        }
    }
    let direct = FringePattern::from_samples(G, sampled, s.m_max, Method::QuantumCoefficient, 0.0);
    let a = visibility(&avg, VisibilityMode::FirstHarmonic).unwrap();
    let b = visibility(&direct, VisibilityMode::FirstHarmonic).unwrap();
    assert!((a - b).abs() < 1e-6);
    let s0: f64 = dist
        .grid
        .iter()
        .zip(&dist.weights)
        .map(|(&v, &w)| w * quantum_pattern_coefficients(&cfg, v, &s).unwrap().mean())
        .sum();
    assert!((avg.mean() - s0).abs() < 1e-12 * s0);
}

#[test]
fn antiphase_speeds_wash_out() {
    // two speeds whose first harmonics point in opposite directions
    let s = Settings::default();
    let cfg = at_ratio(0.5, 0.0);
    let lt = tpp_talbot(160.0);
    let p1 = quantum_pattern_coefficients(&cfg, 160.0, &s).unwrap();
    let mut best = (0.0, 1.0);
    for i in 0..400 {
        let v = 100.0 + i as f64 * 0.5;
        let p2 = quantum_pattern_coefficients(&cfg, v, &s).unwrap();
        let c = (p1.harmonic(1) * p2.harmonic(1).conj()).re
            / (p1.harmonic(1).norm() * p2.harmonic(1).norm());
        if c < best.1 {
            best = (v, c);
        }
    }
    assert!(best.1 < 0.0, "no antiphase speed found for L_T {lt}");
    let dist = VelocityDistribution::new(
        vec![160.0_f64.min(best.0), 160.0_f64.max(best.0)],
        vec![1.0, 1.0],
    )
    .unwrap();
    let avg = velocity_average(&dist, |v| quantum_pattern_coefficients(&cfg, v, &s)).unwrap();
    let va = visibility(&avg, VisibilityMode::FirstHarmonic).unwrap();
    let p2 = quantum_pattern_coefficients(&cfg, best.0, &s).unwrap();
    assert!(va < visibility(&p1, VisibilityMode::FirstHarmonic).unwrap());
    assert!(va < visibility(&p2, VisibilityMode::FirstHarmonic).unwrap());
}

#[test]
fn sine_fit_and_first_harmonic_agree_for_smooth_patterns() {
    let s = Settings::default();
    let cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    let dist = VelocityDistribution::gaussian(160.0, 0.3, 41).unwrap();
    let avg = velocity_average(&dist, |v| quantum_pattern_coefficients(&cfg, v, &s)).unwrap();
    assert!(avg.second_harmonic_ratio() < 0.05);
    let a = visibility(&avg, VisibilityMode::FirstHarmonic).unwrap();
    assert!((a - vis(&avg)).abs() < 0.01);
}

#[test]
fn thickness_and_strength_trade_off() {
    let s = Settings::default();
    let base = InterferometerConfig::tpp().with_c3(TPP_C3);
    let mut thin = base.clone().with_c3(2.0 * TPP_C3);
    for g in thin.gratings.iter_mut() {
        g.thickness /= 2.0;
    }
    let a = quantum_pattern_coefficients(&base, 160.0, &s).unwrap();
    let b = quantum_pattern_coefficients(&thin, 160.0, &s).unwrap();
    assert!(max_deviation(&a, &b) < 1e-9);
    let a = classical_pattern_mc(&base, 160.0, 300_000, 5, &s).unwrap();
    let b = classical_pattern_mc(&thin, 160.0, 300_000, 5, &s).unwrap();
    assert!(max_deviation(&a, &b) < 1e-9);
}

#[test]
fn distance_over_talbot_length_is_what_counts() {
    // λ → λ/2 doubles L_T, so L → 2L keeps L/L_T; c3 ∝ v holds the wall phase
    let s = Settings::default();
    let a_cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    let mut b_cfg = a_cfg.clone().with_c3(2.0 * TPP_C3);
    b_cfg.l1 *= 2.0;
    b_cfg.l2 *= 2.0;
    let a = quantum_pattern_coefficients(&a_cfg, 160.0, &s).unwrap();
    let b = quantum_pattern_coefficients(&b_cfg, 320.0, &s).unwrap();
    let na: Vec<f64> = a.signal.iter().map(|x| x / a.mean()).collect();
    let nb: Vec<f64> = b.signal.iter().map(|x| x / b.mean()).collect();
    let d = na
        .iter()
        .zip(&nb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-3, "{d:e}");
}

#[test]
fn transmission_grid_convergence() {
    let g = GratingSpec::paper();
    let sp = MoleculeSpecies::tpp().with_c3(TPP_C3);
    let m = talbot_core::grating::wall_margin(
        &sp,
        &g,
        160.0,
        talbot_core::grating::DEFAULT_CUTOFF_PHASE,
    )
    .unwrap();
    let a =
        fourier_coefficients(&build_transmission(&sp, &g, 160.0, 8192, m).unwrap(), 40).unwrap();
    let b =
        fourier_coefficients(&build_transmission(&sp, &g, 160.0, 16384, m).unwrap(), 40).unwrap();
    for n in -40..=40 {
        assert!((a.b(n) - b.b(n)).norm() < 1e-6, "b_{n}");
        assert!((a.a(n) - b.a(n)).norm() < 1e-6, "A_{n}");
    }
}

#[test]
fn cutoff_changes_do_not_move_results() {
    let dist = VelocityDistribution::gaussian(160.0, 0.3, 41).unwrap();
    let cfg = InterferometerConfig::tpp();
    let nominal = Settings::default();
    let v0 = averaged_visibility(&cfg, TPP_C3, &dist, &nominal).unwrap();
    let c0 = {
        let c = cfg.clone().with_c3(TPP_C3);
        vis(
            &velocity_average(&dist, |v| classical_pattern_mc(&c, v, 400_000, 1, &nominal))
                .unwrap(),
        )
    };
    for factor in [0.5, 1.5] {
        let s = Settings {
            cutoff_phase: nominal.cutoff_phase * factor,
            ..nominal
        };
        let v = averaged_visibility(&cfg, TPP_C3, &dist, &s).unwrap();
        assert!((v - v0).abs() < 0.02, "quantum {factor}: {v} vs {v0}");
        let c = cfg.clone().with_c3(TPP_C3);
        let cl =
            vis(&velocity_average(&dist, |v| classical_pattern_mc(&c, v, 400_000, 1, &s)).unwrap());
        assert!((cl - c0).abs() < 0.02, "classical {factor}: {cl} vs {c0}");
        assert!((0.10..=0.18).contains(&cl), "classical {factor}: {cl}");
    }
}

/// Deterministic kick map: S_m = a1_{−m} a3_{−m} (1/g) ∫_open2 exp(−2πi m (2x + δ(x))/g) dx
/// with δ the transverse displacement at grating 3.
fn classical_kick_oracle(cfg: &InterferometerConfig, v: f64, m_max: usize) -> Vec<Complex<f64>> {
    let s = Settings::default();
    let margin = s.margin_for(cfg, v).unwrap();
    let w = cfg.gratings[1].slit_width();
    let c = PhysicalConstants::codata();
    let strength = cfg.species.c3_over_hbar() * cfg.gratings[1].thickness / v;
    let scale = c.reduced_planck / cfg.species.mass_kg() * cfg.l2 / v;
    let delta = |x: f64| scale * 3.0 * strength * (1.0 / (w - x).powi(4) - 1.0 / x.powi(4));
    let ddelta = |x: f64| scale * 12.0 * strength * (1.0 / (w - x).powi(5) + 1.0 / x.powi(5));
    let box_coef = |m: isize| -> Complex<f64> {
        if m == 0 {
            return Complex::new((w - 2.0 * margin) / G, 0.0);
        }
        let k = -std::f64::consts::TAU * m as f64 / G;
        let e = |x: f64| Complex::from_polar(1.0, k * x);
        (e(w - margin) - e(margin)) / (Complex::i() * k * G)
    };
    let (nodes, weights) = (
        [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ],
        [
            0.347_854_845_137_453_9,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_9,
        ],
    );
    let kmax = std::f64::consts::TAU * m_max as f64 / G;
    let mut integrals = vec![Complex::new(0.0, 0.0); m_max + 1];
    let mut x = margin;
    let end = w - margin;
    while x < end {
        let h = (0.3 / (kmax * (2.0 + ddelta(x).abs())))
            .min(end - x)
            .max(1e-16);
        for (t, wt) in nodes.iter().zip(weights) {
            let xi = x + 0.5 * h * (t + 1.0);
            let u = 2.0 * xi + delta(xi);
            for (m, acc) in integrals.iter_mut().enumerate() {
                *acc += Complex::from_polar(
                    0.5 * h * wt / G,
                    -std::f64::consts::TAU * m as f64 * u / G,
                );
            }
        }
        x += h;
    }
    (0..=m_max as isize)
        .map(|m| box_coef(-m) * box_coef(-m) * integrals[m as usize])
        .collect()
}

#[test]
fn monte_carlo_kicks_match_the_deterministic_map() {
    let s = Settings::default();
    let cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    let oracle = classical_kick_oracle(&cfg, 160.0, 3);
    let mc = classical_pattern_mc(&cfg, 160.0, 4_000_000, 21, &s).unwrap();
    let scale = mc.mean() / oracle[0].re;
    assert!((scale - 1.0).abs() < 2e-3, "normalisation {scale}");
    let sigma = mc.mean() / (4_000_000f64 * 0.48).sqrt();
    for m in 1..=3 {
        let d = (mc.harmonic(m as isize) - oracle[m]).norm();
        assert!(d < 4.0 * sigma, "m {m}: {d:e} vs σ {sigma:e}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let s = Settings::default();
    let cfg = InterferometerConfig::tpp().with_c3(TPP_C3);
    let dist = VelocityDistribution::gaussian(160.0, 0.3, 21).unwrap();
    let run = || {
        let q = velocity_average(&dist, |v| quantum_pattern_coefficients(&cfg, v, &s)).unwrap();
        let c = velocity_average(&dist, |v| classical_pattern_mc(&cfg, v, 200_000, 4, &s)).unwrap();
        let f = quantum_pattern_fresnel(&cfg, 160.0, 256, 8192, &s).unwrap();
        (q, c, f)
    };
    let parallel = run();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    for (a, b) in [
        (&parallel.0, &serial.0),
        (&parallel.1, &serial.1),
        (&parallel.2, &serial.2),
    ] {
        for (x, y) in a.signal.iter().zip(&b.signal) {
            assert!(
                (x - y).abs() <= 1e-12 * x.abs().max(1e-300),
                "{:?}",
                a.method
            );
        }
    }
}

#[test]
fn single_precision_path_runs() {
    let cfg = talbot_core::kinematics::InterferometerConfig::<f32>::tpp().with_c3(TPP_C3 as f32);
    let s = talbot_core::EngineSettings::<f32>::default();
    let p = quantum_pattern_coefficients(&cfg, 160.0f32, &s).unwrap();
    let q = quantum_pattern_coefficients(
        &InterferometerConfig::tpp().with_c3(TPP_C3),
        160.0,
        &Settings::default(),
    )
    .unwrap();
    let a = visibility(&p, VisibilityMode::SineFit).unwrap() as f64;
    assert!((a - vis(&q)).abs() < 1e-3, "{a} vs {}", vis(&q));
}
