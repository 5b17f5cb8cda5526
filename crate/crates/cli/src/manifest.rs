//! Run manifests: every command writes exactly one alongside its outputs,
//! recording the resolved configuration, seeds, input/output checksums, and
//! wall-clock. The manifest is the only artifact carrying timing, so all
//! other outputs stay bit-reproducible.

use crate::errors::CliResult;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub wall_clock_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, value: impl Serialize) -> &mut Self {
        self.config = serde_json::to_value(value).expect("config serializes");
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seeds.push(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Hash everything and write `<command>.manifest.json` into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> CliResult<PathBuf> {
        let entry = |p: &PathBuf| -> CliResult<FileEntry> {
            let bytes = std::fs::read(p)?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest = hasher.finalize();
            let mut hex = String::with_capacity(64);
            for b in digest {
                hex.push_str(&format!("{b:02x}"));
            }
            Ok(FileEntry {
                path: p.display().to_string(),
                sha256: hex,
            })
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            config: self.config.clone(),
            seeds: self.seeds.clone(),
            inputs: self.inputs.iter().map(entry).collect::<CliResult<_>>()?,
            outputs: self.outputs.iter().map(entry).collect::<CliResult<_>>()?,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        let path = out_dir.join(format!("{}.manifest.json", self.command));
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, json)?;
        Ok(path)
    }
}
