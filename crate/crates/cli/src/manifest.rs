use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "flimdeconv";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to redo a run: the argv, the configuration it resolved
/// to, and SHA-256 digests of what it read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    /// Working directory that relative paths in `argv` resolve against.
    pub cwd: PathBuf,
    pub config: serde_json::Value,
    pub rng_algorithm: Option<String>,
    pub seeds: Vec<u64>,
    /// Absolute input path to digest.
    pub inputs: BTreeMap<String, String>,
    pub output_root: PathBuf,
    /// Output path relative to `output_root` to digest.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Path(path.to_path_buf(), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub(crate) fn absolute(path: &Path) -> CliResult<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(path))
    }
}

/// Collects digests while a command runs.
#[derive(Debug, Default)]
pub struct Recorder {
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    seeds: Vec<u64>,
    rng: bool,
}

impl Recorder {
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(absolute(path)?.display().to_string(), digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn seed(&mut self, seed: u64) {
        self.rng = true;
        self.seeds.push(seed);
    }

    pub fn finish(
        self,
        command: &str,
        argv: &[String],
        config: serde_json::Value,
        output_root: &Path,
    ) -> CliResult<RunManifest> {
        let root = absolute(output_root)?;
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            let abs = absolute(p)?;
            let key = abs.strip_prefix(&root).unwrap_or(&abs).display().to_string();
            outputs.insert(key, sha256_file(p)?);
        }
        Ok(RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            argv: argv.to_vec(),
            cwd: std::env::current_dir()?,
            config,
            rng_algorithm: self.rng.then(|| flimdeconv::phantom::RNG_ALGORITHM.to_string()),
            seeds: self.seeds,
            inputs: self.inputs,
            output_root: root,
            outputs,
        })
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> CliResult<()> {
    let mut json = serde_json::to_string_pretty(manifest)?;
    json.push('\n');
    flimdeconv::io::atomic_write(path, json.as_bytes())?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Path(path.to_path_buf(), e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Output entries whose digest differs, or that exist on only one side.
pub fn digest_mismatches(expected: &RunManifest, actual: &RunManifest) -> Vec<String> {
    let mut bad = Vec::new();
    for (k, v) in &expected.outputs {
        match actual.outputs.get(k) {
            Some(w) if w == v => {}
            Some(_) => bad.push(format!("{k}: digest differs")),
            None => bad.push(format!("{k}: missing")),
        }
    }
    for k in actual.outputs.keys() {
        if !expected.outputs.contains_key(k) {
            bad.push(format!("{k}: unexpected"));
        }
    }
    bad
}
