//! Run manifests and durable output directories.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Everything needed to reproduce an output directory. Passing the manifest
/// back through `--config` re-runs the command with the same settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub config: ConfigFile,
    pub input_state: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: u64, config: ConfigFile, input_state: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config,
            input_state,
            outputs: Vec::new(),
        }
    }
}

/// A named output file held in memory until the manifest is on disk.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        Artifact::new(name, bytes)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))?;
    f.sync_all().map_err(|e| io_err(path, e))
}

/// Write the manifest, then every artifact, syncing each file and finally
/// the directory. Returns the written paths.
pub fn write_outputs(dir: &Path, mut manifest: RunManifest, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    manifest.outputs = artifacts.iter().map(|a| a.name.clone()).collect();
    let mut paths = Vec::with_capacity(artifacts.len() + 1);
    let mpath = dir.join(MANIFEST_NAME);
    write_synced(&mpath, &Artifact::json(MANIFEST_NAME, &manifest).bytes)?;
    paths.push(mpath);
    for a in artifacts {
        let p = dir.join(&a.name);
        write_synced(&p, &a.bytes)?;
        paths.push(p);
    }
    // Persist the directory entries themselves.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(paths)
}
