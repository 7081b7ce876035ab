use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::json;

use talbot_core::num::mix_seed;
use talbot_core::scan::{
    align_and_average, format_scan, generate_scan_ensemble, rank_and_select, read_ensemble,
    reduce_records,
};
use talbot_core::{
    calibrate_c3, classical_pattern_mc, classical_shadow, quantum_pattern_coefficients,
    quantum_pattern_fresnel, velocity_average, visibility, FringePattern, SlitSystem,
    VelocityDistribution, VisibilityMode,
};

use crate::cells;
use crate::config::{Beam, ConfigError, RunConfig};
use crate::output::Csv;

pub const COMMANDS: [&str; 6] = [
    "pattern",
    "sweep",
    "beamline",
    "synth",
    "reduce",
    "calibrate",
];

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Config(ConfigError),
    Model(talbot_core::Error),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Model(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Model(e) => write!(f, "model error: {e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<talbot_core::Error> for Failure {
    fn from(e: talbot_core::Error) -> Self {
        match e {
            talbot_core::Error::Io(m) => Failure::Io(m),
            e => Failure::Model(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: &str, cfg: &RunConfig, out: &Path) -> Outcome {
    fs::create_dir_all(out)?;
    match command {
        "pattern" => pattern(cfg, out),
        "sweep" => sweep(cfg, out),
        "beamline" => beamline(cfg, out),
        "synth" => synth(cfg, out),
        "reduce" => reduce(cfg, out),
        "calibrate" => calibrate(cfg, out),
        other => Err(Failure::Usage(format!("unknown command '{other}'"))),
    }
}

fn sine(p: &FringePattern) -> talbot_core::Result<f64> {
    visibility(p, VisibilityMode::SineFit)
}

fn single_pattern(cfg: &RunConfig, v: f64) -> talbot_core::Result<FringePattern> {
    let ic = cfg.interferometer()?;
    let s = cfg.settings();
    match cfg.pattern.method.as_str() {
        "coefficient" => quantum_pattern_coefficients(&ic, v, &s),
        "fresnel" => quantum_pattern_fresnel(
            &ic,
            v,
            cfg.pattern.source_samples,
            cfg.pattern.grid_size,
            &s,
        ),
        "classical" => classical_pattern_mc(
            &ic,
            v,
            cfg.numerics.trajectories,
            mix_seed(cfg.numerics.seed, v.to_bits()),
            &s,
        ),
        _ => classical_shadow(&ic, &s),
    }
}

fn beam_summary(d: &VelocityDistribution) -> serde_json::Value {
    json!({ "points": d.len(), "mean_mps": d.mean, "fwhm_fraction": d.fwhm_fraction })
}

fn pattern(cfg: &RunConfig, out: &Path) -> Outcome {
    let hash = cfg.hash();
    let (p, speeds) = match (cfg.pattern.velocity, cfg.pattern.method.as_str()) {
        (Some(v), _) => (single_pattern(cfg, v)?, json!({ "single_mps": v })),
        (None, "shadow") => (single_pattern(cfg, cfg.beam()?.v_mean())?, json!(null)),
        (None, _) => {
            let (d, _) = cfg.distribution()?;
            let p = velocity_average(&d, |v| single_pattern(cfg, v))?;
            (p, beam_summary(&d))
        }
    };
    let mut csv = Csv::new(&hash, &["shift_m", "signal", "method"]);
    for (s, y) in p.shift_grid.iter().zip(&p.signal) {
        csv.row(&cells![s, y, p.method.tag()]);
    }
    csv.write(&out.join("fringe.csv"))?;
    let meta = json!({
        "config_hash": hash,
        "config": cfg,
        "method": p.method.tag(),
        "speeds": speeds,
        "period_m": p.period,
        "wall_margin_m": p.wall_margin,
        "mean_signal": p.mean(),
        "visibility_sine_fit": sine(&p)?,
        "visibility_first_harmonic": visibility(&p, VisibilityMode::FirstHarmonic)?,
        "harmonic_ratio_s2_s1": p.second_harmonic_ratio(),
        "m_max": p.m_max,
    });
    fs::write(
        out.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("json") + "\n",
    )?;
    println!(
        "pattern: {} visibility {:.4}, margin {:.3e} m",
        p.method.tag(),
        sine(&p)?,
        p.wall_margin
    );
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &Path) -> Outcome {
    let sw = cfg.sweep.as_ref().ok_or_else(|| {
        Failure::Config(ConfigError {
            line: 0,
            message: "sweep needs a [sweep] section".into(),
        })
    })?;
    let ic = cfg.interferometer()?;
    let s = cfg.settings();
    let mut csv = Csv::new(
        &cfg.hash(),
        &[
            "v_mps",
            "quantum_vis",
            "classical_vis",
            "quantum_vis_averaged",
        ],
    );
    csv.comment(&format!("averaging fwhm_fraction={}", sw.fwhm_fraction));
    for i in 0..sw.points {
        let v = sw.v_min + (sw.v_max - sw.v_min) * i as f64 / (sw.points - 1) as f64;
        let q = sine(&quantum_pattern_coefficients(&ic, v, &s)?)?;
        let c = sine(&classical_pattern_mc(
            &ic,
            v,
            cfg.numerics.trajectories,
            mix_seed(cfg.numerics.seed, i as u64),
            &s,
        )?)?;
        let d = VelocityDistribution::gaussian(v, sw.fwhm_fraction, 41)?;
        let qa = sine(&velocity_average(&d, |u| {
            quantum_pattern_coefficients(&ic, u, &s)
        })?)?;
        csv.row(&cells![v, q, c, qa]);
    }
    csv.write(&out.join("visibility_vs_velocity.csv"))?;
    println!(
        "sweep: {} speeds from {} to {} m/s",
        sw.points, sw.v_min, sw.v_max
    );
    Ok(())
}

fn beamline(cfg: &RunConfig, out: &Path) -> Outcome {
    if !matches!(cfg.beam()?, Beam::Slits { .. }) {
        return Err(Failure::Config(ConfigError {
            line: 0,
            message: "beamline needs [beam] shape = slits".into(),
        }));
    }
    let (d, slits) = cfg.distribution()?;
    let offset = slits
        .as_ref()
        .map_or(0.0, |s: &SlitSystem| s.source_height_offset);
    let mut csv = Csv::new(&cfg.hash(), &["v_mps", "weight"]);
    csv.comment(&format!(
        "mean_mps={} fwhm_fraction={} source_offset_m={offset}",
        d.mean, d.fwhm_fraction
    ));
    for (v, w) in d.grid.iter().zip(&d.weights) {
        csv.row(&cells![v, w]);
    }
    csv.write(&out.join("velocity_distribution.csv"))?;
    println!(
        "beamline: mean {:.2} m/s, FWHM/mean {:.4}, source offset {:.4e} m",
        d.mean, d.fwhm_fraction, offset
    );
    Ok(())
}

fn synth(cfg: &RunConfig, out: &Path) -> Outcome {
    let sy = &cfg.synth;
    let period = cfg
        .grating
        .as_ref()
        .map_or(991.3e-9, |g| g.period_nm * 1e-9);
    let truth = match sy.truth.as_str() {
        "model" => {
            let ic = cfg.interferometer()?;
            let s = cfg.settings();
            let (d, _) = cfg.distribution()?;
            velocity_average(&d, |v| quantum_pattern_coefficients(&ic, v, &s))?
        }
        _ => FringePattern::sinusoid(period, 1.0, sy.truth_visibility, 0.0, 64),
    };
    let records = generate_scan_ensemble(
        &truth,
        sy.rate_scale,
        &cfg.drift(),
        sy.n_scans,
        sy.step_nm * 1e-9,
        sy.span_nm * 1e-9,
        sy.dwell_s,
        cfg.numerics.seed,
    )?;
    let hash = cfg.hash();
    for r in &records {
        let text = format_scan(r);
        let (header, body) = text.split_once('\n').unwrap_or((&text, ""));
        let path = out.join(format!("scan_{:04}.csv", r.timestamp_index));
        fs::write(path, format!("{header}\n# config_hash={hash}\n{body}"))?;
    }
    println!(
        "synth: {} scans written to {}",
        records.len(),
        out.display()
    );
    Ok(())
}

fn reduce(cfg: &RunConfig, out: &Path) -> Outcome {
    let rd = &cfg.reduce;
    let input = rd.input.as_ref().ok_or_else(|| {
        Failure::Config(ConfigError {
            line: 0,
            message: "reduce needs [reduce] input = <scan directory>".into(),
        })
    })?;
    let records = read_ensemble::<f64>(input)?;
    let red = reduce_records(&records, &rd.fractions, rd.bootstrap, cfg.numerics.seed)?;
    let hash = cfg.hash();

    let mut fits = Csv::new(
        &hash,
        &[
            "index",
            "amplitude",
            "offset",
            "phase",
            "period",
            "chi2",
            "visibility",
        ],
    );
    for f in &red.fits {
        fits.row(&cells![
            f.timestamp_index,
            f.amplitude,
            f.offset,
            f.phase,
            f.period,
            f.chi2,
            f.visibility
        ]);
    }
    fits.write(&out.join("fits.csv"))?;

    let mut table = Csv::new(&hash, &["R", "selected", "visibility", "error"]);
    table.comment(&format!("period_m={}", red.period));
    for p in &red.table {
        table.row(&cells![p.fraction, p.selected, p.visibility, p.error]);
    }
    table.write(&out.join("visibility_vs_R.csv"))?;

    let chosen = rank_and_select(&red.fits, rd.combined_fraction)?;
    let scans: Vec<_> = chosen.iter().map(|&i| red.scans[i].clone()).collect();
    let fits_sel: Vec<_> = chosen.iter().map(|&i| red.fits[i].clone()).collect();
    let aligned = align_and_average(&scans, &fits_sel)?;
    let mut combined = Csv::new(&hash, &["position_m", "rate"]);
    combined.comment(&format!(
        "R={} scans={} visibility={}",
        rd.combined_fraction,
        chosen.len(),
        aligned.fit.visibility
    ));
    for (x, y) in aligned
        .combined
        .positions
        .iter()
        .zip(&aligned.combined.rates)
    {
        combined.row(&cells![x, y]);
    }
    combined.write(&out.join("combined_fringe.csv"))?;
    println!(
        "reduce: {} scan pairs, period {:.2} nm, visibility at R={} {:.4}",
        red.scans.len(),
        red.period * 1e9,
        rd.combined_fraction,
        aligned.fit.visibility
    );
    Ok(())
}

fn calibrate(cfg: &RunConfig, out: &Path) -> Outcome {
    let target = cfg
        .calibrate
        .as_ref()
        .ok_or_else(|| {
            Failure::Config(ConfigError {
                line: 0,
                message: "calibrate needs a [calibrate] section with 'target'".into(),
            })
        })?
        .target;
    let ic = cfg.interferometer()?;
    let (d, _) = cfg.distribution()?;
    let cal = calibrate_c3(&ic, target, &d, &cfg.settings())?;
    let mut csv = Csv::new(
        &cfg.hash(),
        &[
            "c3_meV_nm3",
            "achieved_visibility",
            "bracket_lo",
            "bracket_hi",
        ],
    );
    csv.comment(&format!("target={target}"));
    csv.row(&cells![cal.c3, cal.achieved, cal.bracket.0, cal.bracket.1]);
    csv.write(&out.join("calibration.csv"))?;
    println!(
        "calibrate: c3 = {:.4} meV nm^3 gives visibility {:.4}",
        cal.c3, cal.achieved
    );
    Ok(())
}
