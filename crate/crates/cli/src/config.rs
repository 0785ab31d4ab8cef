//! Optional JSON configuration. Each subcommand reads its own section and
//! unknown keys are rejected. Command-line flags win over the file, which wins
//! over built-in defaults.

use std::path::Path;

use addgp::FitConfig;
use serde::Deserialize;

use crate::{FamilyArg, KindArg, StructureArg, TrendArg};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    #[serde(default)]
    pub doe: DoeSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub submodel: SubmodelSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub bench_p: BenchPSection,
    #[serde(default)]
    pub bench_addsep: BenchAddSepSection,
    #[serde(default)]
    pub bench_gfun: BenchGFunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoeSection {
    pub kind: Option<KindArg>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub family: Option<FamilyArg>,
    pub structure: Option<StructureArg>,
    pub trend: Option<TrendArg>,
    pub mu: Option<f64>,
    pub optimizer: Option<FitConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmodelSection {
    pub grid: Option<usize>,
    pub raw: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPSection {
    pub d: Option<Vec<usize>>,
    pub theta: Option<Vec<String>>,
    pub n_t: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchAddSepSection {
    pub d: Option<Vec<usize>>,
    pub n_t: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGFunSection {
    pub d: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub n_t: Option<usize>,
    pub seed: Option<u64>,
    pub family: Option<FamilyArg>,
    pub optimizer: Option<FitConfig>,
}

pub fn load(path: Option<&Path>) -> addgp::Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?),
    }
}

/// Flag, then config value, then default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
