//! JSON run configurations. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use anyhow::Result;
use feastest_core::inference::{BoundedTestOptions, InstrumentSpec, TestOptions};
use feastest_core::norms::{ColumnScaling, NormOrder};
use feastest_core::sim::StudyConfig;
use feastest_core::thresholds::AlphaSplit;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::{fail, Classify, Kind};

pub const SEED_ENV: &str = "FEASTEST_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV with a header row; relative to the config file.
    pub path: PathBuf,
    pub covariates: Vec<String>,
    pub response: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub expr: String,
    /// Missing means `−∞`.
    #[serde(default)]
    pub lower: Option<f64>,
    /// Missing means `+∞`.
    #[serde(default)]
    pub upper: Option<f64>,
}

fn covariates() -> InstrumentSpec {
    InstrumentSpec::Covariates
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig<O> {
    pub data: DataConfig,
    pub model: String,
    pub params: Vec<String>,
    pub hypothesis: Vec<ConstraintConfig>,
    #[serde(default = "covariates")]
    pub instruments: InstrumentSpec,
    #[serde(default)]
    pub scaling: ColumnScaling,
    #[serde(default)]
    pub options: O,
    /// `ci` only: also report the vector-slack region under this inner norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_tilde: Option<NormOrder>,
}

pub type TestConfig = ProblemConfig<TestOptions>;
pub type BoundedConfig = ProblemConfig<BoundedTestOptions>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub data: DataConfig,
    #[serde(default = "covariates")]
    pub instruments: InstrumentSpec,
    #[serde(default)]
    pub scaling: ColumnScaling,
    #[serde(default)]
    pub options: TestOptions,
    /// Also report the separation `δ` needed for power `1 − β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<AlphaSplit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarkasConfig {
    /// `d × p` matrix `A`, header row of column names.
    pub a: PathBuf,
    /// Column `b`, plus an optional 0/1 column `noisy` marking observed rows.
    pub b: PathBuf,
    /// The first `noisy_rows` rows are noisy; overrides the `noisy` column.
    #[serde(default)]
    pub noisy_rows: Option<usize>,
    /// Noise scale of the observed rows; without it the exact certificate is computed.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub options: TestOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSource {
    /// Columns of a CSV file.
    Csv { path: PathBuf },
    /// Standard normal `n × L` draws with the given seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    #[serde(default = "inf")]
    pub q: NormOrder,
    /// Design for the expectation bracket; skipped when absent.
    #[serde(default)]
    pub design: Option<DesignSource>,
    #[serde(default = "bracket_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
}

fn inf() -> NormOrder {
    NormOrder::Inf
}

fn bracket_draws() -> usize {
    50_000
}

/// Parses a JSON config; relative paths are resolved later against `base_dir`.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).kind_with(Kind::Io, || format!("reading {}", path.display()))?;
    serde_json::from_str(&text).kind_with(Kind::Config, || format!("parsing {}", path.display()))
}

pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// The `FEASTEST_SEED` override, if set.
pub fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| fail(Kind::Config, format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(fail(Kind::Config, format!("{SEED_ENV}: {e}"))),
    }
}

/// SHA-256 of the config after defaults and overrides, as canonical JSON.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    let bytes = serde_json::to_vec(cfg).kind(Kind::Config)?;
    Ok(crate::data::sha256_hex(&bytes))
}

pub fn preset(name: &str) -> Result<StudyConfig> {
    let (table, rest) = name
        .split_once("_n")
        .ok_or_else(|| fail(Kind::Config, format!("unknown preset `{name}`")))?;
    let (n, l) = rest
        .split_once("_L")
        .and_then(|(n, l)| Some((n.parse::<usize>().ok()?, l.parse::<usize>().ok()?)))
        .ok_or_else(|| fail(Kind::Config, format!("unknown preset `{name}`")))?;
    match (table, n, l) {
        ("table1", 30 | 90, 3 | 4) => Ok(StudyConfig::table1(n, l)),
        ("table2", 30 | 90, 45 | 60) => Ok(StudyConfig::table2(n, l)),
        _ => Err(fail(
            Kind::Config,
            format!("unknown preset `{name}`; expected table1_n{{30,90}}_L{{3,4}} or table2_n{{30,90}}_L{{45,60}}"),
        )),
    }
}
