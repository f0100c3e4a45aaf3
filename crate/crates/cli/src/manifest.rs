//! Provenance record written next to every command's outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &Path, data: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            sha256: hex(&Sha256::digest(data)),
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Succeeded,
    Failed { exit_code: u8, error: String },
}

/// What ran, on which inputs, with which settings, and what it wrote.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub subcommand: String,
    pub args: Vec<String>,
    pub out_dir: String,
    /// Effective settings after defaults, environment and flags.
    pub settings: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_ms: u128,
    pub elapsed_secs: f64,
    pub status: RunStatus,
}

/// Collects inputs and outputs of one invocation.
pub struct Run {
    pub out_dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    pub fn new(subcommand: &str, out_dir: PathBuf, threads: usize) -> Self {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            manifest: RunManifest {
                tool: "raildelay",
                tool_version: env!("CARGO_PKG_VERSION"),
                subcommand: subcommand.to_string(),
                args: std::env::args().skip(1).collect(),
                out_dir: out_dir.display().to_string(),
                settings: serde_json::Value::Null,
                seed: None,
                threads,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix_ms: started,
                elapsed_secs: 0.0,
                status: RunStatus::Succeeded,
            },
            out_dir,
            clock: Instant::now(),
        }
    }

    pub fn settings(&mut self, settings: impl Serialize) -> Result<()> {
        self.manifest.settings = serde_json::to_value(settings)?;
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let data = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.manifest.inputs.push(FileDigest::of(path, &data));
        Ok(data)
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("cannot create {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        fs::write(&path, data).with_context(|| format!("cannot write {}", path.display()))?;
        self.manifest.outputs.push(FileDigest::of(Path::new(name), data));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest; called once whether or not the command failed.
    pub fn finish(mut self, status: RunStatus) -> Result<()> {
        self.manifest.elapsed_secs = self.clock.elapsed().as_secs_f64();
        self.manifest.status = status;
        fs::create_dir_all(&self.out_dir)?;
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let name = format!("manifest-{}.json", self.manifest.subcommand);
        fs::write(self.out_dir.join(name), text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
