//! Result files, run manifests and convergence histories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use momap::solver::ConvergenceRecord;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the input file, when the command reads one.
    pub input_sha256: Option<String>,
    pub seed: u64,
    pub version: &'static str,
    pub duration_seconds: f64,
    pub status: String,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(input: Option<&[u8]>, seed: u64, duration: Duration, status: &str, exit_code: i32) -> Self {
        RunManifest {
            command_line: std::env::args().collect(),
            input_sha256: input.map(|bytes| hex::encode(Sha256::digest(bytes))),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: duration.as_secs_f64(),
            status: status.to_string(),
            exit_code,
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the result to `out` (or stdout) and the manifest next to it (or
/// to stderr when there is no output file).
pub fn emit(result: &serde_json::Value, manifest: &RunManifest, out: Option<&Path>) -> std::io::Result<()> {
    let body = serde_json::to_string_pretty(result)? + "\n";
    let meta = serde_json::to_string_pretty(manifest)? + "\n";
    match out {
        Some(path) => {
            fs::write(path, body)?;
            fs::write(manifest_path(path), meta)?;
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            std::io::stderr().write_all(meta.as_bytes())?;
        }
    }
    Ok(())
}

pub fn write_history(path: &Path, history: &[ConvergenceRecord]) -> Result<(), Box<dyn std::error::Error>> {
    let mut w = csv::Writer::from_path(path)?;
    for record in history {
        w.serialize(record)?;
    }
    w.flush()?;
    Ok(())
}
