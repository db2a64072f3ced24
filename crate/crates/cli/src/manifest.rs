//! Run manifests. Every command that writes files also writes
//! `<output stem>.manifest.json` next to its main output, and the outputs
//! name that file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use possible_worlds::io::to_json_string;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub engine_version: &'static str,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    pub path: PathBuf,
}

/// `out.json` -> `out.manifest.json`; a directory `out` -> `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = match out.extension() {
        Some(_) => out.with_extension(""),
        None => out.to_path_buf(),
    };
    let mut name = stem.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    stem.with_file_name(name)
}

/// File name of `path` as written into outputs, so the reference survives
/// moving the directory.
pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

impl ManifestBuilder {
    pub fn start(command: &'static str, main_output: &Path) -> Self {
        ManifestBuilder { command, started: Instant::now(), path: manifest_path(main_output) }
    }

    pub fn reference(&self) -> String {
        file_name(&self.path)
    }

    pub fn finish(
        self,
        config: serde_json::Value,
        seed: Option<u64>,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> Result<(), CliError> {
        let m = RunManifest {
            command: self.command.to_owned(),
            args: std::env::args().collect(),
            config,
            seed,
            engine_version: env!("CARGO_PKG_VERSION"),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            threads: rayon::current_num_threads(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        write(&self.path, &to_json_string(&m, true)?)
    }
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(manifest_path(Path::new("a/run.json")), Path::new("a/run.manifest.json"));
        assert_eq!(manifest_path(Path::new("csvdir")), Path::new("csvdir.manifest.json"));
    }
}
