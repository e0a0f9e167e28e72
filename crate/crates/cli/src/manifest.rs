//! Run provenance. Every subcommand leaves exactly one `manifest.json` in its
//! output directory; two runs whose manifests agree on everything but wall
//! time produce identical outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    /// sha256 hex digest of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub wall_time_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot hash {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `out_dir/manifest.json`. Call it last so the wall time covers the
/// whole command.
pub fn write(
    out_dir: &Path,
    command: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: &[&Path],
    started: Instant,
) -> Result<(), CliError> {
    let mut hashed = BTreeMap::new();
    for path in inputs {
        hashed.insert(path.display().to_string(), sha256_file(path)?);
    }
    let doc = RunManifest {
        command,
        config,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        inputs: hashed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let body = serde_json::to_string_pretty(&doc)?;
    fs::write(out_dir.join("manifest.json"), body + "\n")?;
    Ok(())
}
