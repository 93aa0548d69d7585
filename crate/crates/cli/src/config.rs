//! Run configuration files.
//!
//! Rates are in units of J and times in units of 1/J throughout.

use std::ops::Range;
use std::path::{Path, PathBuf};

use hcbh_core::device::DeviceConfig;
use hcbh_core::evolution::{EvolutionSettings, Method};
use hcbh_core::lattice::{build_lattice, TomographyColoring};
use hcbh_core::tomography::Estimator;
use hcbh_core::LatticeSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    DriveDynamics,
    DetuningSweep,
    TomographyStudy,
    SamplingStudy,
    ScalingStudy,
    SchmidtStudy,
    #[serde(rename = "1d-comparison")]
    OneDComparison,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::DriveDynamics => "drive-dynamics",
            Kind::DetuningSweep => "detuning-sweep",
            Kind::TomographyStudy => "tomography-study",
            Kind::SamplingStudy => "sampling-study",
            Kind::ScalingStudy => "scaling-study",
            Kind::SchmidtStudy => "schmidt-study",
            Kind::OneDComparison => "1d-comparison",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Spanned<u32>,
    kind: Spanned<Kind>,
    device: Option<Spanned<String>>,
    lattice: Option<Spanned<LatticeSection>>,
    seed: Option<u64>,
    workers: Option<usize>,
    out_dir: Option<String>,
    formats: Option<Spanned<Vec<Format>>>,
    j_over_2pi_mhz: Option<f64>,
    spectrum: Option<SpectrumSection>,
    drive: Option<Spanned<DriveSection>>,
    evolution: Option<Spanned<EvolutionSection>>,
    subsystems: Option<Spanned<SubsystemSection>>,
    tomography: Option<Spanned<TomographySection>>,
    scaling: Option<Spanned<ScalingSection>>,
    schmidt: Option<Spanned<SchmidtSection>>,
    comparison: Option<Spanned<ComparisonSection>>,
}

/// Uniform lattice built from scratch instead of a device file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "one")]
    pub j_nn: f64,
    #[serde(default)]
    pub j_nnn: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default)]
    pub delta: f64,
    /// Also report the spectrum with next-nearest-neighbor couplings removed.
    #[serde(default)]
    pub compare_without_nnn: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriveSection {
    #[serde(default = "half")]
    omega: f64,
    #[serde(default = "ten")]
    t: f64,
    deltas: Option<Vec<f64>>,
    delta_range: Option<RangeSection>,
    /// Sampling interval of time traces.
    #[serde(default = "quarter")]
    sample_dt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeSection {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvolutionSection {
    step: Option<f64>,
    tolerance: Option<f64>,
    method: Option<Method>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSection {
    #[serde(default = "six")]
    pub max_volume: usize,
    /// Restrict analyses to these volumes (default: all up to `max_volume`).
    pub volumes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TomographySection {
    n_s: Vec<u64>,
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    estimator: Estimator,
    mle_tol: Option<f64>,
    mle_max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingSection {
    r: Vec<f64>,
    v_max: Vec<usize>,
    seeds: Option<Vec<u64>>,
    per_volume_cap: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchmidtSection {
    #[serde(default = "five")]
    pub volume: usize,
    #[serde(default = "milli")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    /// Window [start, end] for the population steady-state check.
    #[serde(default = "window")]
    pub window: [f64; 2],
    /// Time at which entropy growth is measured against the end of the run.
    #[serde(default = "ten")]
    pub reference_time: f64,
    /// Length of the uniform chain evolved alongside the configured lattice.
    #[serde(default = "fourteen")]
    pub chain_sites: usize,
    /// NNN couplings of the chain variants.
    #[serde(default = "zero_list")]
    pub chain_j_nnn: Vec<f64>,
    /// Also evolve the configured lattice.
    #[serde(default = "yes")]
    pub include_configured: bool,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn ten() -> f64 {
    10.0
}
fn quarter() -> f64 {
    0.25
}
fn six() -> usize {
    6
}
fn five() -> usize {
    5
}
fn milli() -> f64 {
    1e-3
}
fn fourteen() -> usize {
    14
}
fn zero_list() -> Vec<f64> {
    vec![0.0]
}
fn yes() -> bool {
    true
}
fn window() -> [f64; 2] {
    [8.0, 12.0]
}

#[derive(Debug, Clone)]
pub struct DriveGrid {
    pub omega: f64,
    pub t: f64,
    pub deltas: Vec<f64>,
    pub sample_dt: f64,
}

#[derive(Debug, Clone)]
pub struct TomographyGrid {
    pub n_s: Vec<u64>,
    pub seeds: Vec<u64>,
    pub estimator: Estimator,
    pub mle: hcbh_core::tomography::MleSettings,
}

#[derive(Debug, Clone)]
pub struct ScalingGrid {
    pub r: Vec<f64>,
    pub v_max: Vec<usize>,
    pub seeds: Vec<u64>,
    pub per_volume_cap: Option<usize>,
}

/// A validated configuration with all defaults resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: Kind,
    pub lattice_name: String,
    pub spec: LatticeSpec,
    pub coloring: TomographyColoring,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub j_over_2pi_mhz: f64,
    pub spectrum: SpectrumSection,
    pub drive: Option<DriveGrid>,
    pub evolution: EvolutionSettings,
    pub subsystems: SubsystemSection,
    pub tomography: Option<TomographyGrid>,
    pub scaling: Option<ScalingGrid>,
    pub schmidt: SchmidtSection,
    pub comparison: ComparisonSection,
    /// SHA-256 of the config text and the overrides that affect results.
    pub hash: String,
}

impl RunConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn at<T>(text: &str, s: &Spanned<T>, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {}: {msg}", line_of(text, s.span())))
}

fn require<'a, T>(
    text: &str,
    kind: &Spanned<Kind>,
    section: &'a Option<Spanned<T>>,
    name: &str,
) -> Result<&'a Spanned<T>, CliError> {
    section.as_ref().ok_or_else(|| {
        at(text, kind, format!("kind = \"{}\" requires a [{name}] section", kind.get_ref().name()))
    })
}

fn hash_hex(text: &str, overrides: &Overrides) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    if let Some(seed) = overrides.seed {
        h.update(format!("\n#override seed = {seed}\n").as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Load and validate a config file. Relative paths inside the file resolve
/// against its directory.
pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base, overrides).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| format!("line {}: ", line_of(text, s))).unwrap_or_default();
        CliError::Config(format!("{line}{}", e.message()))
    })?;
    if *raw.schema_version.get_ref() != SCHEMA_VERSION {
        return Err(at(
            text,
            &raw.schema_version,
            format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", raw.schema_version.get_ref()),
        ));
    }
    let kind = *raw.kind.get_ref();

    let (lattice_name, spec, coloring, device_mhz) = match (&raw.device, &raw.lattice) {
        (Some(d), None) => {
            let device = if d.get_ref() == "paper" {
                DeviceConfig::paper_device()
            } else {
                let p = base.join(d.get_ref());
                DeviceConfig::load(&p).map_err(|e| at(text, d, e))?
            };
            let coloring = device.coloring.clone().unwrap_or_else(|| TomographyColoring::distinct(device.spec.n_sites()));
            (device.name.clone(), device.spec, coloring, device.j_over_2pi_mhz)
        }
        (None, Some(l)) => {
            let s = l.get_ref();
            let spec = build_lattice(s.rows, s.cols, s.j_nn, s.j_nnn, None, None).map_err(|e| at(text, l, e))?;
            let n = spec.n_sites();
            (format!("{}x{} lattice", s.rows, s.cols), spec, TomographyColoring::distinct(n), None)
        }
        (Some(d), Some(_)) => return Err(at(text, d, "give either device or [lattice], not both")),
        (None, None) => return Err(at(text, &raw.kind, "missing device or [lattice] section")),
    };

    let formats = match &raw.formats {
        Some(f) if f.get_ref().is_empty() => return Err(at(text, f, "formats must not be empty")),
        Some(f) if !f.get_ref().contains(&Format::Csv) => {
            return Err(at(text, f, "formats must include \"csv\""));
        }
        Some(f) => f.get_ref().clone(),
        None => vec![Format::Csv, Format::Json],
    };

    let mut evolution = EvolutionSettings::default();
    if let Some(e) = &raw.evolution {
        let s = e.get_ref();
        evolution.step = s.step.unwrap_or(evolution.step);
        evolution.tolerance = s.tolerance.unwrap_or(evolution.tolerance);
        evolution.method = s.method.unwrap_or(evolution.method);
        evolution.validate().map_err(|err| at(text, e, err))?;
    }

    let drive_needed = matches!(
        kind,
        Kind::DriveDynamics
            | Kind::DetuningSweep
            | Kind::TomographyStudy
            | Kind::SamplingStudy
            | Kind::SchmidtStudy
            | Kind::OneDComparison
    );
    let drive = if drive_needed {
        let d = require(text, &raw.kind, &raw.drive, "drive")?;
        Some(drive_grid(text, d)?)
    } else {
        None
    };

    let subsystems = match &raw.subsystems {
        Some(s) => {
            let v = s.get_ref();
            if v.max_volume == 0 || v.max_volume > coloring.n_colors() {
                return Err(at(
                    text,
                    s,
                    format!("max_volume must be between 1 and the {} tomography colors", coloring.n_colors()),
                ));
            }
            if let Some(vols) = &v.volumes {
                if vols.is_empty() || vols.iter().any(|&x| x == 0 || x > v.max_volume) {
                    return Err(at(text, s, "volumes must be nonempty and within 1..=max_volume"));
                }
            }
            v.clone()
        }
        None => SubsystemSection { max_volume: six().min(coloring.n_colors()), volumes: None },
    };

    let seed = overrides.seed.or(raw.seed).unwrap_or(0);
    let tomography = if matches!(kind, Kind::TomographyStudy | Kind::SamplingStudy) {
        let t = require(text, &raw.kind, &raw.tomography, "tomography")?;
        let s = t.get_ref();
        if s.n_s.is_empty() || s.n_s.contains(&0) {
            return Err(at(text, t, "n_s must be a nonempty list of positive sample counts"));
        }
        let seeds = match (&s.seeds, overrides.seed) {
            (_, Some(o)) => vec![o],
            (Some(list), None) if !list.is_empty() => list.clone(),
            (Some(_), None) => return Err(at(text, t, "seeds must not be empty")),
            (None, None) => vec![seed],
        };
        let mut mle = hcbh_core::tomography::MleSettings::default();
        mle.tol = s.mle_tol.unwrap_or(mle.tol);
        mle.max_iterations = s.mle_max_iterations.unwrap_or(mle.max_iterations);
        if !(mle.tol >= 0.0) || mle.max_iterations == 0 {
            return Err(at(text, t, "mle_tol must be >= 0 and mle_max_iterations >= 1"));
        }
        Some(TomographyGrid { n_s: s.n_s.clone(), seeds, estimator: s.estimator, mle })
    } else {
        None
    };

    let scaling = if kind == Kind::ScalingStudy {
        let sc = require(text, &raw.kind, &raw.scaling, "scaling")?;
        let s = sc.get_ref();
        if s.r.is_empty() || s.r.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(at(text, sc, "r must be a nonempty list of values in [0, 1]"));
        }
        if s.v_max.is_empty() || s.v_max.iter().any(|&v| v < 2 || v > spec.n_sites()) {
            return Err(at(text, sc, "v_max values must lie in 2..=N"));
        }
        let seeds = match (&s.seeds, overrides.seed) {
            (_, Some(o)) => vec![o],
            (Some(list), None) if !list.is_empty() => list.clone(),
            (Some(_), None) => return Err(at(text, sc, "seeds must not be empty")),
            (None, None) => vec![seed],
        };
        Some(ScalingGrid { r: s.r.clone(), v_max: s.v_max.clone(), seeds, per_volume_cap: s.per_volume_cap })
    } else {
        None
    };

    let schmidt = match &raw.schmidt {
        Some(s) => {
            let v = s.get_ref();
            if v.volume == 0 || v.volume > subsystems.max_volume.max(coloring.n_colors()) {
                return Err(at(text, s, "schmidt volume out of range"));
            }
            if !(v.epsilon > 0.0 && v.epsilon < 1.0) {
                return Err(at(text, s, "epsilon must lie in (0, 1)"));
            }
            v.clone()
        }
        None => SchmidtSection { volume: five().min(coloring.n_colors()), epsilon: milli() },
    };

    let comparison = match &raw.comparison {
        Some(c) => {
            let v = c.get_ref();
            if !(v.window[0] >= 0.0 && v.window[0] < v.window[1]) || !(v.reference_time >= 0.0) {
                return Err(at(text, c, "window must be increasing and reference_time >= 0"));
            }
            if v.chain_sites < 2 || v.chain_sites > 24 || v.chain_j_nnn.iter().any(|j| !j.is_finite()) {
                return Err(at(text, c, "chain_sites must lie in 2..=24 and chain_j_nnn must be finite"));
            }
            v.clone()
        }
        None => ComparisonSection {
            window: window(),
            reference_time: ten(),
            chain_sites: fourteen(),
            chain_j_nnn: zero_list(),
            include_configured: yes(),
        },
    };
    if kind == Kind::OneDComparison {
        let t_end = drive.as_ref().map_or(0.0, |d| d.t);
        if comparison.window[1] > t_end || comparison.reference_time > t_end {
            return Err(at(text, &raw.kind, format!("comparison window must end before the drive time t = {t_end}")));
        }
    }

    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| raw.out_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| base.join("out"));

    Ok(RunConfig {
        kind,
        lattice_name,
        spec,
        coloring,
        seed,
        workers: overrides.workers.or(raw.workers),
        out_dir,
        formats,
        j_over_2pi_mhz: raw.j_over_2pi_mhz.or(device_mhz).unwrap_or(5.9),
        spectrum: raw.spectrum.unwrap_or(SpectrumSection { delta: 0.0, compare_without_nnn: false }),
        drive,
        evolution,
        subsystems,
        tomography,
        scaling,
        schmidt,
        comparison,
        hash: hash_hex(text, overrides),
    })
}

fn drive_grid(text: &str, d: &Spanned<DriveSection>) -> Result<DriveGrid, CliError> {
    let s = d.get_ref();
    if !(s.omega >= 0.0 && s.omega.is_finite()) || !(s.t > 0.0 && s.t.is_finite()) {
        return Err(at(text, d, "omega must be >= 0 and t > 0"));
    }
    if !(s.sample_dt > 0.0) {
        return Err(at(text, d, "sample_dt must be positive"));
    }
    let deltas = match (&s.deltas, &s.delta_range) {
        (Some(list), None) => list.clone(),
        (None, Some(r)) => {
            if !(r.step > 0.0) || !(r.stop >= r.start) {
                return Err(at(text, d, "delta_range needs step > 0 and stop >= start"));
            }
            let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
            (0..=n).map(|k| r.start + k as f64 * r.step).collect()
        }
        (Some(_), Some(_)) => return Err(at(text, d, "give either deltas or delta_range, not both")),
        (None, None) => return Err(at(text, d, "missing deltas or delta_range")),
    };
    if deltas.is_empty() || deltas.iter().any(|x| !x.is_finite()) {
        return Err(at(text, d, "deltas must be a nonempty list of finite values"));
    }
    Ok(DriveGrid { omega: s.omega, t: s.t, deltas, sample_dt: s.sample_dt })
}
