//! Flat INI run configuration.
//!
//! ```text
//! [species]
//! name = TPP
//! mass_amu = 614
//! c3_meV_nm3 = 17.6547
//! ```
//!
//! Keys and section names are case-insensitive. Full-line comments start with
//! `#` or `;`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use talbot_core::beamline::DEFAULT_EMISSION_SAMPLES;
use talbot_core::{
    DriftModel, GratingSpec, InterferometerConfig, MoleculeSpecies, Settings, SlitSystem,
    SourceSpectrum, VelocityDistribution,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, Default)]
pub struct Ini {
    sections: Vec<Section>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut ini = Ini::default();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(n, format!("unterminated section header '{line}'")))?
                    .trim()
                    .to_ascii_lowercase();
                if name.is_empty() {
                    return Err(err(n, "empty section name"));
                }
                if ini.sections.iter().any(|s| s.name == name) {
                    return Err(err(n, format!("section [{name}] appears twice")));
                }
                ini.sections.push(Section {
                    name,
                    line: n,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(err(n, "missing key before '='"));
            }
            let section = ini
                .sections
                .last_mut()
                .ok_or_else(|| err(n, format!("key '{key}' lies outside any section")))?;
            if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
                return Err(err(
                    n,
                    format!("key '{key}' already set on line {}", prev.line),
                ));
            }
            section.entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line: n,
            });
        }
        Ok(ini)
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Typed access to one section; unread keys are reported by `finish`.
struct Reader<'a> {
    section: Option<&'a Section>,
    name: &'static str,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(ini: &'a Ini, name: &'static str) -> Self {
        Self {
            section: ini.section(name),
            name,
            used: BTreeSet::new(),
        }
    }

    fn line(&self) -> usize {
        self.section.map_or(0, |s| s.line)
    }

    fn present(&self) -> bool {
        self.section.is_some()
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        self.used.insert(key.to_string());
        self.section?.entries.iter().find(|e| e.key == key)
    }

    fn parsed<T: std::str::FromStr>(
        &mut self,
        key: &str,
        what: &str,
    ) -> Result<Option<(T, usize)>, ConfigError> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(|v| Some((v, e.line)))
                .map_err(|_| {
                    err(
                        e.line,
                        format!("{}.{key}: expected {what}, got '{}'", self.name, e.value),
                    )
                }),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<(f64, usize), ConfigError> {
        let line = self.line();
        let (v, line) = self
            .parsed::<f64>(key, "a number")?
            .unwrap_or((default, line));
        if !v.is_finite() {
            return Err(err(line, format!("{}.{key} must be finite", self.name)));
        }
        Ok((v, line))
    }

    fn f64_req(&mut self, key: &str) -> Result<(f64, usize), ConfigError> {
        let line = self.line();
        match self.parsed::<f64>(key, "a number")? {
            Some((v, l)) if v.is_finite() => Ok((v, l)),
            Some((_, l)) => Err(err(l, format!("{}.{key} must be finite", self.name))),
            None => Err(err(line, format!("[{}] needs '{key}'", self.name))),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        match self.parsed::<f64>(key, "a number")? {
            Some((v, l)) if !v.is_finite() => {
                Err(err(l, format!("{}.{key} must be finite", self.name)))
            }
            other => Ok(other),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<(usize, usize), ConfigError> {
        let line = self.line();
        Ok(self
            .parsed::<usize>(key, "a non-negative integer")?
            .unwrap_or((default, line)))
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<(u64, usize), ConfigError> {
        let line = self.line();
        Ok(self
            .parsed::<u64>(key, "a non-negative integer")?
            .unwrap_or((default, line)))
    }

    fn string_or(&mut self, key: &str, default: &str) -> (String, usize) {
        let line = self.line();
        self.entry(key)
            .map_or((default.to_string(), line), |e| (e.value.clone(), e.line))
    }

    fn list_or(&mut self, key: &str, default: &[f64]) -> Result<(Vec<f64>, usize), ConfigError> {
        let line = self.line();
        match self.entry(key) {
            None => Ok((default.to_vec(), line)),
            Some(e) => e
                .value
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(|v| (v, e.line))
                .map_err(|_| {
                    err(
                        e.line,
                        format!("{}.{key}: expected comma-separated numbers", self.name),
                    )
                }),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(s) = self.section {
            if let Some(e) = s.entries.iter().find(|e| !self.used.contains(&e.key)) {
                return Err(err(
                    e.line,
                    format!("unknown key '{}' in [{}]", e.key, self.name),
                ));
            }
        }
        Ok(())
    }
}

fn check(ok: bool, line: usize, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(err(line, message))
    }
}

fn model(line: usize, e: talbot_core::Error) -> ConfigError {
    err(line, e.to_string())
}

const SECTIONS: [&str; 10] = [
    "species",
    "grating",
    "geometry",
    "beam",
    "numerics",
    "pattern",
    "sweep",
    "synth",
    "reduce",
    "calibrate",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesBlock {
    pub name: String,
    pub mass_amu: f64,
    pub c3_mev_nm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GratingBlock {
    pub period_nm: f64,
    pub open_fraction: f64,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryBlock {
    pub l1_m: f64,
    pub l2_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Beam {
    Delta {
        v_mean: f64,
    },
    Gaussian {
        v_mean: f64,
        fwhm_fraction: f64,
        points: usize,
    },
    /// Effusive source filtered by three horizontal slits.
    Slits {
        v_mean: f64,
        temperature_k: f64,
        z2_m: f64,
        z3_m: f64,
        /// `None` tunes the offset until the selected mean equals `v_mean`.
        source_offset_m: Option<f64>,
        grid_points: usize,
        emission_samples: usize,
    },
}

impl Beam {
    pub fn v_mean(&self) -> f64 {
        match *self {
            Beam::Delta { v_mean } | Beam::Gaussian { v_mean, .. } | Beam::Slits { v_mean, .. } => {
                v_mean
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericsBlock {
    pub sample_count: usize,
    pub n_max: usize,
    pub m_max: usize,
    pub shift_samples: usize,
    pub cutoff_phase: f64,
    pub wall_margin_nm: Option<f64>,
    pub trajectories: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternBlock {
    pub method: String,
    /// Single speed; `None` averages over the beam.
    pub velocity: Option<f64>,
    pub source_samples: usize,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepBlock {
    pub v_min: f64,
    pub v_max: f64,
    pub points: usize,
    pub fwhm_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthBlock {
    pub truth: String,
    pub truth_visibility: f64,
    pub rate_scale: f64,
    pub n_scans: usize,
    pub step_nm: f64,
    pub span_nm: f64,
    pub dwell_s: f64,
    pub drift_sigma_nm: f64,
    pub within_scan_drift_nm: f64,
    pub background_start: f64,
    pub background_end: f64,
    pub background_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReduceBlock {
    pub input: Option<PathBuf>,
    pub fractions: Vec<f64>,
    pub bootstrap: usize,
    pub combined_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateBlock {
    pub target: f64,
}

/// Fully resolved and validated run parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub species: Option<SpeciesBlock>,
    pub grating: Option<GratingBlock>,
    pub geometry: Option<GeometryBlock>,
    pub beam: Option<Beam>,
    pub numerics: NumericsBlock,
    pub pattern: PatternBlock,
    pub sweep: Option<SweepBlock>,
    pub synth: SynthBlock,
    pub reduce: ReduceBlock,
    pub calibrate: Option<CalibrateBlock>,
}

impl RunConfig {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(0, format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_text(&text, base, seed)
    }

    pub fn from_text(text: &str, base: &Path, seed: Option<u64>) -> Result<Self, ConfigError> {
        let ini = Ini::parse(text)?;
        if let Some(s) = ini
            .sections
            .iter()
            .find(|s| !SECTIONS.contains(&s.name.as_str()))
        {
            return Err(err(s.line, format!("unknown section [{}]", s.name)));
        }
        let species = read_species(&ini)?;
        let grating = read_grating(&ini)?;
        let geometry = read_geometry(&ini)?;
        let beam = read_beam(&ini)?;
        let mut numerics = read_numerics(&ini)?;
        if let Some(seed) = seed {
            numerics.seed = seed;
        }
        let pattern = read_pattern(&ini)?;
        let sweep = read_sweep(&ini, beam.as_ref())?;
        let synth = read_synth(&ini, grating.as_ref())?;
        let reduce = read_reduce(&ini, base)?;
        let calibrate = read_calibrate(&ini)?;
        let cfg = RunConfig {
            species,
            grating,
            geometry,
            beam,
            numerics,
            pattern,
            sweep,
            synth,
            reduce,
            calibrate,
        };
        cfg.cross_check(&ini)?;
        Ok(cfg)
    }

    /// Checks that need several blocks at once.
    fn cross_check(&self, ini: &Ini) -> Result<(), ConfigError> {
        let line = |name: &str| ini.section(name).map_or(0, |s| s.line);
        if let (Some(_), Some(_), Some(_)) = (&self.species, &self.grating, &self.geometry) {
            let cfg = self
                .interferometer()
                .map_err(|e| model(line("geometry"), e))?;
            let s = self.settings();
            if let Some(beam) = &self.beam {
                s.margin_for(&cfg, beam.v_mean())
                    .map_err(|e| model(line("beam"), e))?;
            }
        }
        if let (Some(Beam::Slits { .. }), Some(_)) = (&self.beam, &self.species) {
            let src = self.source().map_err(|e| model(line("beam"), e))?;
            self.slits().map_err(|e| model(line("beam"), e))?;
            let grid = src.grid(0.1, 3.5, 2);
            talbot_core::beamline::effusive_flux_spectrum(&src, &grid)
                .map_err(|e| model(line("beam"), e))?;
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn species(&self) -> talbot_core::Result<MoleculeSpecies> {
        let s = self.species.as_ref().ok_or_else(|| missing("species"))?;
        MoleculeSpecies::new(s.name.clone(), s.mass_amu, s.c3_mev_nm3)
    }

    pub fn interferometer(&self) -> talbot_core::Result<InterferometerConfig> {
        let g = self.grating.as_ref().ok_or_else(|| missing("grating"))?;
        let geo = self.geometry.as_ref().ok_or_else(|| missing("geometry"))?;
        let spec = GratingSpec::new(g.period_nm * 1e-9, g.open_fraction, g.thickness_nm * 1e-9)?;
        InterferometerConfig::new(
            [spec.clone(), spec.clone(), spec],
            geo.l1_m,
            geo.l2_m,
            self.species()?,
        )
    }

    pub fn settings(&self) -> Settings {
        let n = &self.numerics;
        Settings {
            sample_count: n.sample_count,
            n_max: n.n_max,
            m_max: n.m_max,
            shift_samples: n.shift_samples,
            cutoff_phase: n.cutoff_phase,
            wall_margin: n.wall_margin_nm.map(|m| m * 1e-9),
        }
    }

    pub fn beam(&self) -> talbot_core::Result<&Beam> {
        self.beam.as_ref().ok_or_else(|| missing("beam"))
    }

    pub fn source(&self) -> talbot_core::Result<SourceSpectrum> {
        match self.beam()? {
            Beam::Slits { temperature_k, .. } => {
                SourceSpectrum::new(*temperature_k, self.species()?)
            }
            _ => Err(talbot_core::Error::Domain(
                "beam shape is not 'slits'".into(),
            )),
        }
    }

    /// Slit system before offset tuning.
    pub fn slits(&self) -> talbot_core::Result<SlitSystem> {
        match self.beam()? {
            Beam::Slits {
                v_mean,
                z2_m,
                z3_m,
                source_offset_m,
                ..
            } => {
                let s = SlitSystem::three_slit(*z2_m, *z3_m, *v_mean)?;
                Ok(match source_offset_m {
                    Some(o) => s.with_offset(*o),
                    None => s,
                })
            }
            _ => Err(talbot_core::Error::Domain(
                "beam shape is not 'slits'".into(),
            )),
        }
    }

    /// Velocity distribution of the configured beam, with the slit system used.
    pub fn distribution(&self) -> talbot_core::Result<(VelocityDistribution, Option<SlitSystem>)> {
        match self.beam()? {
            Beam::Delta { v_mean } => Ok((VelocityDistribution::delta(*v_mean)?, None)),
            Beam::Gaussian {
                v_mean,
                fwhm_fraction,
                points,
            } => Ok((
                VelocityDistribution::gaussian(*v_mean, *fwhm_fraction, *points)?,
                None,
            )),
            Beam::Slits {
                v_mean,
                source_offset_m,
                grid_points,
                emission_samples,
                ..
            } => {
                use talbot_core::beamline::{selected_distribution, tune_source_offset};
                let src = self.source()?;
                let grid = src.grid(0.1, 3.5, *grid_points);
                let slits = match source_offset_m {
                    Some(_) => self.slits()?,
                    None => {
                        tune_source_offset(&src, &self.slits()?, &grid, *emission_samples, *v_mean)?
                    }
                };
                let d = selected_distribution(&src, &slits, &grid, *emission_samples)?;
                Ok((d, Some(slits)))
            }
        }
    }

    pub fn drift(&self) -> DriftModel {
        let s = &self.synth;
        DriftModel {
            per_scan_shift_sigma: s.drift_sigma_nm * 1e-9,
            within_scan_drift: s.within_scan_drift_nm * 1e-9,
            background_rate_start: s.background_start,
            background_rate_end: s.background_end,
            background_noise_fraction: s.background_noise,
            noise_reference_time: 1.0,
            jitter_sigma: 0.0,
        }
    }
}

fn missing(section: &str) -> talbot_core::Error {
    talbot_core::Error::Domain(format!("this command needs a [{section}] section"))
}

fn read_species(ini: &Ini) -> Result<Option<SpeciesBlock>, ConfigError> {
    let mut r = Reader::new(ini, "species");
    if !r.present() {
        return Ok(None);
    }
    let (name, _) = r.string_or("name", "molecule");
    let (mass_amu, _) = r.f64_req("mass_amu")?;
    let (c3_mev_nm3, _) = r.f64_or("c3_mev_nm3", 0.0)?;
    let line = r.line();
    r.finish()?;
    MoleculeSpecies::new(name.clone(), mass_amu, c3_mev_nm3).map_err(|e| model(line, e))?;
    Ok(Some(SpeciesBlock {
        name,
        mass_amu,
        c3_mev_nm3,
    }))
}

fn read_grating(ini: &Ini) -> Result<Option<GratingBlock>, ConfigError> {
    let mut r = Reader::new(ini, "grating");
    if !r.present() {
        return Ok(None);
    }
    let (period_nm, _) = r.f64_or("period_nm", 991.3)?;
    let (open_fraction, fl) = r.f64_or("open_fraction", 0.48)?;
    let (thickness_nm, _) = r.f64_or("thickness_nm", 500.0)?;
    check(
        open_fraction > 0.0 && open_fraction < 1.0,
        fl,
        "grating.open_fraction must lie in (0, 1)",
    )?;
    let line = r.line();
    r.finish()?;
    GratingSpec::new(period_nm * 1e-9, open_fraction, thickness_nm * 1e-9)
        .map_err(|e| model(line, e))?;
    Ok(Some(GratingBlock {
        period_nm,
        open_fraction,
        thickness_nm,
    }))
}

fn read_geometry(ini: &Ini) -> Result<Option<GeometryBlock>, ConfigError> {
    let mut r = Reader::new(ini, "geometry");
    if !r.present() {
        return Ok(None);
    }
    let (l1_m, l1) = r.f64_req("l1_m")?;
    let (l2_m, l2) = r.f64_or("l2_m", l1_m)?;
    check(l1_m > 0.0, l1, "geometry.L1_m must be positive")?;
    check(l2_m > 0.0, l2, "geometry.L2_m must be positive")?;
    r.finish()?;
    Ok(Some(GeometryBlock { l1_m, l2_m }))
}

fn read_beam(ini: &Ini) -> Result<Option<Beam>, ConfigError> {
    let mut r = Reader::new(ini, "beam");
    if !r.present() {
        return Ok(None);
    }
    let (v_mean, vl) = r.f64_req("v_mean")?;
    check(v_mean > 0.0, vl, "beam.v_mean must be positive")?;
    let (shape, sl) = r.string_or("shape", "gaussian");
    let beam = match shape.to_ascii_lowercase().as_str() {
        "delta" => Beam::Delta { v_mean },
        "gaussian" => {
            let (fwhm_fraction, fl) = r.f64_req("fwhm_fraction")?;
            let (points, pl) = r.usize_or("points", 41)?;
            check(
                fwhm_fraction > 0.0 && fwhm_fraction < 2.0,
                fl,
                "beam.fwhm_fraction must lie in (0, 2)",
            )?;
            check(points >= 3, pl, "beam.points must be at least 3")?;
            VelocityDistribution::gaussian(v_mean, fwhm_fraction, points)
                .map_err(|e| model(fl, e))?;
            Beam::Gaussian {
                v_mean,
                fwhm_fraction,
                points,
            }
        }
        "slits" => {
            let (temperature_k, tl) = r.f64_req("temperature_k")?;
            let (z2_m, zl2) = r.f64_req("z2_m")?;
            let (z3_m, zl3) = r.f64_req("z3_m")?;
            let source_offset_m = r.f64_opt("source_offset_m")?.map(|x| x.0);
            let (grid_points, gl) = r.usize_or("grid_points", 681)?;
            let (emission_samples, el) =
                r.usize_or("emission_samples", DEFAULT_EMISSION_SAMPLES)?;
            check(
                temperature_k > 0.0,
                tl,
                "beam.temperature_K must be positive",
            )?;
            check(z2_m > 0.0, zl2, "beam.z2_m must be positive")?;
            check(z3_m > z2_m, zl3, "beam.z3_m must exceed z2_m")?;
            check(
                grid_points >= 16,
                gl,
                "beam.grid_points must be at least 16",
            )?;
            check(
                emission_samples >= 1000,
                el,
                "beam.emission_samples must be at least 1000",
            )?;
            Beam::Slits {
                v_mean,
                temperature_k,
                z2_m,
                z3_m,
                source_offset_m,
                grid_points,
                emission_samples,
            }
        }
        other => {
            return Err(err(
                sl,
                format!("beam.shape must be delta, gaussian or slits, got '{other}'"),
            ))
        }
    };
    r.finish()?;
    Ok(Some(beam))
}

fn read_numerics(ini: &Ini) -> Result<NumericsBlock, ConfigError> {
    let d = Settings::default();
    let mut r = Reader::new(ini, "numerics");
    let (sample_count, _) = r.usize_or("sample_count", d.sample_count)?;
    let (n_max, _) = r.usize_or("n_max", d.n_max)?;
    let (m_max, _) = r.usize_or("m_max", d.m_max)?;
    let (shift_samples, _) = r.usize_or("shift_samples", d.shift_samples)?;
    let (cutoff_phase, cl) = r.f64_or("cutoff_phase", d.cutoff_phase)?;
    let wall_margin_nm = r.f64_opt("wall_margin_nm")?;
    let (trajectories, tl) = r.u64_or("trajectories", 1_000_000)?;
    let (seed, _) = r.u64_or("seed", 1)?;
    check(
        cutoff_phase > 0.0,
        cl,
        "numerics.cutoff_phase must be positive",
    )?;
    check(
        trajectories > 0,
        tl,
        "numerics.trajectories must be positive",
    )?;
    if let Some((m, l)) = wall_margin_nm {
        check(m >= 0.0, l, "numerics.wall_margin_nm must be non-negative")?;
    }
    let line = r.line();
    r.finish()?;
    let n = NumericsBlock {
        sample_count,
        n_max,
        m_max,
        shift_samples,
        cutoff_phase,
        wall_margin_nm: wall_margin_nm.map(|x| x.0),
        trajectories,
        seed,
    };
    let settings = Settings {
        sample_count,
        n_max,
        m_max,
        shift_samples,
        cutoff_phase,
        wall_margin: n.wall_margin_nm.map(|m| m * 1e-9),
    };
    settings.validate().map_err(|e| model(line, e))?;
    Ok(n)
}

const METHODS: [&str; 4] = ["coefficient", "fresnel", "classical", "shadow"];

fn read_pattern(ini: &Ini) -> Result<PatternBlock, ConfigError> {
    let mut r = Reader::new(ini, "pattern");
    let (method, ml) = r.string_or("method", "coefficient");
    let method = method.to_ascii_lowercase();
    check(
        METHODS.contains(&method.as_str()),
        ml,
        format!("pattern.method must be one of {METHODS:?}, got '{method}'"),
    )?;
    let velocity = r.f64_opt("velocity")?;
    if let Some((v, l)) = velocity {
        check(v > 0.0, l, "pattern.velocity must be positive")?;
    }
    let (source_samples, sl) = r.usize_or("source_samples", 256)?;
    let (grid_size, gl) = r.usize_or("grid_size", 8192)?;
    check(
        grid_size.is_power_of_two() && grid_size >= 4096,
        gl,
        "pattern.grid_size must be a power of two ≥ 4096",
    )?;
    check(
        source_samples >= 64 && grid_size % source_samples == 0,
        sl,
        "pattern.source_samples must be ≥ 64 and divide grid_size",
    )?;
    r.finish()?;
    Ok(PatternBlock {
        method,
        velocity: velocity.map(|x| x.0),
        source_samples,
        grid_size,
    })
}

fn read_sweep(ini: &Ini, beam: Option<&Beam>) -> Result<Option<SweepBlock>, ConfigError> {
    let mut r = Reader::new(ini, "sweep");
    if !r.present() {
        return Ok(None);
    }
    let (v_min, l1) = r.f64_or("v_min", 110.0)?;
    let (v_max, l2) = r.f64_or("v_max", 260.0)?;
    let (points, pl) = r.usize_or("points", 16)?;
    let default_width = match beam {
        Some(Beam::Gaussian { fwhm_fraction, .. }) => *fwhm_fraction,
        _ => 0.3,
    };
    let (fwhm_fraction, fl) = r.f64_or("fwhm_fraction", default_width)?;
    check(v_min > 0.0, l1, "sweep.v_min must be positive")?;
    check(v_max > v_min, l2, "sweep.v_max must exceed v_min")?;
    check(points >= 2, pl, "sweep.points must be at least 2")?;
    check(
        fwhm_fraction > 0.0 && fwhm_fraction < 2.0,
        fl,
        "sweep.fwhm_fraction must lie in (0, 2)",
    )?;
    r.finish()?;
    Ok(Some(SweepBlock {
        v_min,
        v_max,
        points,
        fwhm_fraction,
    }))
}

fn read_synth(ini: &Ini, grating: Option<&GratingBlock>) -> Result<SynthBlock, ConfigError> {
    let mut r = Reader::new(ini, "synth");
    let (truth, tl) = r.string_or("truth", "sinusoid");
    let truth = truth.to_ascii_lowercase();
    check(
        truth == "sinusoid" || truth == "model",
        tl,
        "synth.truth must be sinusoid or model",
    )?;
    let (truth_visibility, vl) = r.f64_or("truth_visibility", 0.27)?;
    let (rate_scale, rl) = r.f64_or("rate_scale", 30.0)?;
    let (n_scans, nl) = r.usize_or("n_scans", 68)?;
    let (step_nm, stl) = r.f64_or("step_nm", 40.0)?;
    let (span_nm, spl) = r.f64_or("span_nm", 3000.0)?;
    let (dwell_s, dl) = r.f64_or("dwell_s", 60.0)?;
    let (drift_sigma_nm, _) = r.f64_or("drift_sigma_nm", 200.0)?;
    let (within_scan_drift_nm, _) = r.f64_or("within_scan_drift_nm", 100.0)?;
    let (background_start, _) = r.f64_or("background_start", 70.0)?;
    let (background_end, _) = r.f64_or("background_end", 130.0)?;
    let (background_noise, _) = r.f64_or("background_noise", 0.3)?;
    check(
        (0.0..=1.0).contains(&truth_visibility),
        vl,
        "synth.truth_visibility must lie in [0, 1]",
    )?;
    check(
        rate_scale >= 0.0,
        rl,
        "synth.rate_scale must be non-negative",
    )?;
    check(
        n_scans >= 2 && n_scans % 2 == 0,
        nl,
        "synth.n_scans must be even and at least 2",
    )?;
    check(step_nm > 0.0, stl, "synth.step_nm must be positive")?;
    check(
        span_nm >= 3.0 * step_nm,
        spl,
        "synth.span_nm must cover at least three steps",
    )?;
    check(dwell_s > 0.0, dl, "synth.dwell_s must be positive")?;
    if let Some(g) = grating {
        check(
            span_nm >= 2.0 * g.period_nm,
            spl,
            "synth.span_nm must cover two grating periods",
        )?;
    }
    let line = r.line();
    r.finish()?;
    let block = SynthBlock {
        truth,
        truth_visibility,
        rate_scale,
        n_scans,
        step_nm,
        span_nm,
        dwell_s,
        drift_sigma_nm,
        within_scan_drift_nm,
        background_start,
        background_end,
        background_noise,
    };
    let drift = DriftModel {
        per_scan_shift_sigma: drift_sigma_nm * 1e-9,
        within_scan_drift: within_scan_drift_nm * 1e-9,
        background_rate_start: background_start,
        background_rate_end: background_end,
        background_noise_fraction: background_noise,
        noise_reference_time: 1.0,
        jitter_sigma: 0.0,
    };
    drift.validate().map_err(|e| model(line, e))?;
    Ok(block)
}

fn read_reduce(ini: &Ini, base: &Path) -> Result<ReduceBlock, ConfigError> {
    let mut r = Reader::new(ini, "reduce");
    let input = r.entry("input").map(|e| base.join(&e.value));
    let (fractions, fl) = r.list_or("fractions", &[0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0])?;
    let (bootstrap, bl) = r.usize_or("bootstrap", 200)?;
    let (combined_fraction, cl) = r.f64_or("combined_fraction", 0.4)?;
    check(
        !fractions.is_empty() && fractions.iter().all(|&f| f > 0.0 && f <= 1.0),
        fl,
        "reduce.fractions must lie in (0, 1]",
    )?;
    check(
        bootstrap >= 200,
        bl,
        "reduce.bootstrap must be at least 200",
    )?;
    check(
        combined_fraction > 0.0 && combined_fraction <= 1.0,
        cl,
        "reduce.combined_fraction must lie in (0, 1]",
    )?;
    r.finish()?;
    Ok(ReduceBlock {
        input,
        fractions,
        bootstrap,
        combined_fraction,
    })
}

fn read_calibrate(ini: &Ini) -> Result<Option<CalibrateBlock>, ConfigError> {
    let mut r = Reader::new(ini, "calibrate");
    if !r.present() {
        return Ok(None);
    }
    let (target, tl) = r.f64_req("target")?;
    check(
        target > 0.0 && target < 1.0,
        tl,
        "calibrate.target must lie in (0, 1)",
    )?;
    r.finish()?;
    Ok(Some(CalibrateBlock { target }))
}
