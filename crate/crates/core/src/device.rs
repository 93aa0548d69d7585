//! Device description files.
//!
//! A device file is TOML:
//!
//! ```toml
//! schema_version = 1
//! name = "my-device"
//! rows = 4
//! cols = 4
//! j_nn = 1.0            # uniform nearest-neighbor coupling, units of J
//! j_nnn = 0.05          # uniform coupling for all distance-2 pairs
//! j_over_2pi_mhz = 5.9  # optional, annotates outputs only
//! site_detunings = []   # optional, one entry per site, units of J
//!
//! [drive]               # optional, defaults to alpha = 1 everywhere
//! magnitudes = [...]    # |alpha_j| in [0, 1]
//! phases = [...]        # arg(alpha_j) in radians
//!
//! [coloring]            # optional
//! colors = [...]        # color per site, -1 marks an excluded site
//! excluded_sites = []   # extra exclusions
//!
//! [[couplings]]         # optional per-bond overrides, 0 removes the bond
//! sites = [0, 1]
//! j = 0.97
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeSpec, TomographyColoring};

pub const DEVICE_SCHEMA_VERSION: u32 = 1;

const PAPER_DEVICE: &str = include_str!("../data/paper_device.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    schema_version: u32,
    #[serde(default)]
    name: Option<String>,
    rows: usize,
    cols: usize,
    j_nn: f64,
    #[serde(default)]
    j_nnn: f64,
    #[serde(default)]
    j_over_2pi_mhz: Option<f64>,
    #[serde(default)]
    site_detunings: Option<Vec<f64>>,
    #[serde(default)]
    drive: Option<RawDrive>,
    #[serde(default)]
    coloring: Option<RawColoring>,
    #[serde(default)]
    couplings: Vec<RawCoupling>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    magnitudes: Vec<f64>,
    phases: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColoring {
    colors: Vec<i64>,
    #[serde(default)]
    excluded_sites: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    sites: [usize; 2],
    j: f64,
}

/// A lattice together with its optional tomography coloring.
#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub name: String,
    pub spec: LatticeSpec,
    pub coloring: Option<TomographyColoring>,
    /// J/2π in MHz, for annotating outputs.
    pub j_over_2pi_mhz: Option<f64>,
}

impl DeviceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawDevice = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if raw.schema_version != DEVICE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported device schema_version {} (expected {DEVICE_SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let n = raw.rows * raw.cols;
        let drive = match raw.drive {
            None => None,
            Some(d) => {
                if d.magnitudes.len() != n || d.phases.len() != n {
                    return Err(Error::Config(format!(
                        "drive needs {n} magnitudes and phases, got {} and {}",
                        d.magnitudes.len(),
                        d.phases.len()
                    )));
                }
                Some(
                    d.magnitudes
                        .iter()
                        .zip(&d.phases)
                        .map(|(&m, &p)| Complex64::from_polar(m, p))
                        .collect(),
                )
            }
        };
        let spec = build_lattice(raw.rows, raw.cols, raw.j_nn, raw.j_nnn, drive, raw.site_detunings)
            .map_err(|e| Error::Config(e.to_string()))?;
        let overrides: Vec<(usize, usize, f64)> =
            raw.couplings.iter().map(|c| (c.sites[0], c.sites[1], c.j)).collect();
        let spec = spec.with_couplings(&overrides).map_err(|e| Error::Config(e.to_string()))?;

        let coloring = match raw.coloring {
            None => None,
            Some(c) => {
                if c.colors.len() != n {
                    return Err(Error::Config(format!(
                        "coloring needs {n} entries, got {}",
                        c.colors.len()
                    )));
                }
                let mut colors: Vec<Option<usize>> = Vec::with_capacity(n);
                for &v in &c.colors {
                    colors.push(match v {
                        -1 => None,
                        v if v >= 0 => Some(v as usize),
                        v => return Err(Error::Config(format!("invalid color {v}"))),
                    });
                }
                for &s in &c.excluded_sites {
                    if s >= n {
                        return Err(Error::Config(format!("excluded site {s} out of range")));
                    }
                    colors[s] = None;
                }
                Some(TomographyColoring::new(colors))
            }
        };
        Ok(Self {
            name: raw.name.unwrap_or_else(|| "device".into()),
            spec,
            coloring,
            j_over_2pi_mhz: raw.j_over_2pi_mhz,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The bundled 4×4 device: characterized drive couplings, uniform NN
    /// exchange, uniform J/20 NNN exchange and the six-color tomography layout.
    pub fn paper_device() -> Self {
        Self::from_toml_str(PAPER_DEVICE).expect("bundled device config is valid")
    }

    /// Source text of the bundled device config.
    pub fn paper_device_toml() -> &'static str {
        PAPER_DEVICE
    }
}
