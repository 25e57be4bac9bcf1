// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run manifests written next to every artifact.
//!
//! Manifests hold no timings, thread counts or absolute paths, so re-running
//! the same command reproduces them byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use binsight_core::evaluation::Classifier;
use binsight_core::indicators::GridConfig;
use binsight_core::signalgen::DatasetSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{write_json, CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: Option<u64>,
    pub datasets: Vec<DatasetSpec>,
    pub grids: BTreeMap<String, GridConfig>,
    pub classifiers: Vec<Classifier>,
    /// File name → SHA-256 of the inputs read.
    pub inputs: BTreeMap<String, String>,
    /// File name → SHA-256 of the outputs written.
    pub outputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    Ok(sha256_hex(&bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// `dir/matrix.csv` → `dir/matrix.csv.manifest.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    artifact.with_file_name(format!("{}.manifest.json", file_name(artifact)))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: None,
            datasets: Vec::new(),
            grids: BTreeMap::new(),
            classifiers: Vec::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.master_seed = Some(seed);
        self
    }

    pub fn dataset(mut self, spec: &DatasetSpec) -> Self {
        self.datasets.push(spec.clone());
        self
    }

    pub fn grid(mut self, name: &str, grid: &GridConfig) -> Self {
        let key = Path::new(name)
            .file_name()
            .map_or_else(|| name.to_string(), |n| n.to_string_lossy().into_owned());
        self.grids.insert(key, grid.clone());
        self
    }

    pub fn classifier(mut self, classifier: &Classifier) -> Self {
        self.classifiers.push(classifier.clone());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn input(mut self, path: &Path) -> CliResult<Self> {
        self.inputs.insert(file_name(path), hash_file(path)?);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> CliResult<Self> {
        self.outputs.insert(file_name(path), hash_file(path)?);
        Ok(self)
    }

    pub fn write_beside(&self, artifact: &Path) -> CliResult<()> {
        write_json(&manifest_path(artifact), self)
    }

    pub fn write_to(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}
