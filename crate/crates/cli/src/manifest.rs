use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::commands::{self, Run};
use crate::{Command, Failure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command run: enough to repeat it and check the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub invocation: Command,
    /// Resolved configuration after defaults and flag overrides.
    pub config: Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Outputs of a run that hit the solver time limit depend on machine
    /// speed, so replaying it may not reproduce them.
    #[serde(default)]
    pub timed_out: bool,
    pub wall_time_ms: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths.iter().map(|p| Ok(FileHash { path: p.clone(), sha256: sha256_file(p)? })).collect()
}

pub fn write(cmd: &Command, run: &Run, elapsed: Duration) -> Result<()> {
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        invocation: cmd.clone(),
        config: run.config.clone(),
        inputs: hashes(&run.inputs)?,
        outputs: hashes(&run.outputs)?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: run.seed,
        timed_out: run.timed_out,
        wall_time_ms: elapsed.as_millis() as u64,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&run.manifest, text).with_context(|| format!("writing {}", run.manifest.display()))?;
    log::info!("wrote {}", run.manifest.display());
    Ok(())
}

/// Verifies input hashes, re-runs the recorded command into a scratch
/// directory and compares every output hash.
pub fn check(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).context(Failure::Data)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .with_context(|| format!("{}: not a run manifest", path.display()))
        .context(Failure::Data)?;
    if manifest.tool_version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest was written by version {}", manifest.tool_version);
    }
    if manifest.timed_out {
        log::warn!("recorded run hit the solver time limit; outputs may not replay exactly");
    }
    for input in &manifest.inputs {
        let now = sha256_file(&input.path).context(Failure::Data)?;
        if now != input.sha256 {
            return Err(anyhow::anyhow!("input {} changed since the recorded run", input.path.display()))
                .context(Failure::Data);
        }
    }

    let scratch = tempfile::tempdir().context("creating scratch directory")?;
    let mut cmd = manifest.invocation.clone();
    cmd.redirect_outputs(scratch.path());
    let run = commands::run(&cmd)?;
    let replayed = hashes(&run.outputs)?;

    let mut mismatches = Vec::new();
    if replayed.len() != manifest.outputs.len() {
        mismatches.push(format!("{} outputs recorded, {} produced", manifest.outputs.len(), replayed.len()));
    }
    for (old, new) in manifest.outputs.iter().zip(&replayed) {
        if old.sha256 != new.sha256 {
            mismatches.push(format!("{} differs", old.path.display()));
        }
    }
    if !mismatches.is_empty() {
        return Err(anyhow::anyhow!("replay mismatch: {}", mismatches.join("; "))).context(Failure::Data);
    }
    eprintln!("{}: {} inputs and {} outputs verified", path.display(), manifest.inputs.len(), replayed.len());
    Ok(false)
}
