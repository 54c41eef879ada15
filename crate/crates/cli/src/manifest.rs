//! Run manifest: per command, the content hashes of what it read and wrote,
//! the configuration and the master seed. No timestamps, so unchanged
//! reruns leave the file byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::pipeline::{Command, Outcome};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Hash of the configuration after command-line overrides.
    pub effective_config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Keys are relative to the output directory when the file lives inside it.
fn hashes(out: &Path, paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| {
            let key = p.strip_prefix(out).unwrap_or(p).display().to_string();
            Ok((key, sha256_file(p)?))
        })
        .collect()
}

pub fn record(cfg: &Resolved, cmd: Command, outcome: &Outcome) -> Result<PathBuf> {
    let out = cfg.out_dir();
    let path = out.join(MANIFEST);
    let mut manifest: Manifest = match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_default(),
        Err(_) => Manifest::default(),
    };
    let effective = serde_json::to_vec(&cfg.config)?;
    manifest.runs.insert(
        cmd.name().to_owned(),
        RunRecord {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed: cfg.config.seed,
            config_sha256: hex::encode(Sha256::digest(&cfg.config_bytes)),
            effective_config_sha256: hex::encode(Sha256::digest(&effective)),
            inputs: hashes(&out, &outcome.inputs)?,
            outputs: hashes(&out, &outcome.outputs)?,
        },
    );
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
