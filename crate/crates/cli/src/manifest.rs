use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{io_at, Failure, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one run: enough to re-execute it and check the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Canonical arguments after the subcommand name; replaying them
    /// reproduces the run.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: Vec<String>, seed: Option<u64>, parameters: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            argv,
            seed,
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Outcome<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Outcome<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Outcome<()> {
        io_at(fs::write(path, self.to_json()), path)
    }

    pub fn read(path: &Path) -> Outcome<Self> {
        let text = io_at(fs::read_to_string(path), path)?;
        serde_json::from_str(&text).map_err(|e| Failure::usage(e).context(format!("{}: not a run manifest", path.display())))
    }
}

pub fn hash_file(path: &Path) -> Outcome<FileHash> {
    let bytes = io_at(fs::read(path), path)?;
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    })
}

/// Manifest path next to a primary output.
pub fn beside(path: &Path) -> PathBuf {
    with_suffix(path, ".manifest.json")
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
