use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use crate::failure::{Classify, Kind};

/// Every artifact carries the provenance needed to reproduce it. Nothing
/// time- or host-dependent goes in, so reruns are byte-identical.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_sha256: String,
    pub seeds: BTreeMap<&'static str, u64>,
    /// SHA-256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub config: &'a C,
    pub result: &'a R,
}

impl<'a, C: Serialize, R: Serialize> Envelope<'a, C, R> {
    pub fn new(command: &'a str, config: &'a C, result: &'a R) -> Result<Self> {
        Ok(Self {
            tool: "feastest",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: crate::config::config_hash(config)?,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            config,
            result,
        })
    }

    pub fn seed(mut self, name: &'static str, seed: u64) -> Self {
        self.seeds.insert(name, seed);
        self
    }

    pub fn input(mut self, path: &Path, sha256: &str) -> Self {
        self.inputs.insert(path.display().to_string(), sha256.to_string());
        self
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).kind(Kind::Compute)?;
    text.push('\n');
    std::fs::write(&path, text).kind_with(Kind::Io, || format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).kind_with(Kind::Io, || format!("creating {}", dir.display()))
}
