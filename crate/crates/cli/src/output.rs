//! CSV and JSON writers plus the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip text for a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    sha256: String,
    bytes: usize,
}

/// Collects emitted files so the manifest can list them.
pub struct Output {
    dir: PathBuf,
    json: bool,
    artifacts: Vec<Artifact>,
}

impl Output {
    pub fn create(config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
        Ok(Self { dir: config.out_dir.clone(), json: config.wants(Format::Json), artifacts: Vec::new() })
    }

    pub fn json_enabled(&self) -> bool {
        self.json
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.artifacts.push(Artifact { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| io_err(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(&path, e))?;
        self.write_bytes(name, &bytes)
    }

    /// Written only when JSON output is enabled.
    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        if !self.json {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&self.dir.join(name), e))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Write `manifest.json` and return its path.
    pub fn finish(self, config: &RunConfig) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "tool": concat!("hcbh-lab ", env!("CARGO_PKG_VERSION")),
            "kind": config.kind.name(),
            "lattice": config.lattice_name,
            "n_sites": config.spec.n_sites(),
            "seed": config.seed,
            "config_sha256": config.hash,
            "units": {
                "rates": "J",
                "times": "1/J",
                "j_over_2pi_mhz": config.j_over_2pi_mhz,
            },
            "files": self.artifacts,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}
