//! Fuzzing campaigns: configuration, the on-disk run layout, the main loop
//! that feeds generated programs through differential testing, and reports.

mod report;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::difftest::{CompilerSpec, DiffError};
use crate::evolution::GaConfig;
use crate::generator::{GenError, SamplerConfig};
use crate::grammar::{load_grammar, EnrichedGrammar};
use crate::semantics::{extract_context, SemanticContext};

pub use report::{generate_report, replay_registry, Report};
#[cfg(test)]
pub(crate) fn read_jsonl_for_tests<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    report::read_jsonl(path).unwrap()
}

pub use run::{run_campaign, CampaignSummary, LogRecord, ProgramRecord, SnapshotLine};

/// Version of the run directory layout; bumped on incompatible changes.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("compiler error: {0}")]
    Compiler(#[source] DiffError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CampaignError {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CampaignError {
        let context = context.into();
        move |source| CampaignError::Io { context, source }
    }
}

impl From<DiffError> for CampaignError {
    fn from(e: DiffError) -> Self {
        match e {
            DiffError::InvalidSpec { .. } => CampaignError::Config(e.to_string()),
            DiffError::Io(source) => CampaignError::Io {
                context: "differential test".into(),
                source,
            },
            other => CampaignError::Compiler(other),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Rs,
    Sodga,
    Modga,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rs" | "random" => Ok(Algorithm::Rs),
            "sodga" => Ok(Algorithm::Sodga),
            "modga" => Ok(Algorithm::Modga),
            _ => Err(format!("unknown algorithm '{s}' (expected rs, sodga or modga)")),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Rs => "rs",
            Algorithm::Sodga => "sodga",
            Algorithm::Modga => "modga",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub algorithm: Algorithm,
    /// Wall-clock budget in seconds.
    pub budget: f64,
    /// Stop after this many programs even if budget remains.
    pub max_programs: Option<u64>,
    /// Global seed; overrides `sampler.rng_seed`.
    pub seed: u64,
    /// Concurrent compiler invocations; 0 means one per CPU.
    pub workers: usize,
    /// Seconds between snapshots.
    pub snapshot_interval: f64,
    /// Parent directory of run directories; `runs` if unset.
    pub output: Option<PathBuf>,
    /// Name of the run directory; derived from algorithm and seed if unset.
    pub run_id: Option<String>,
    /// Grammar profile file; the shipped profile if unset.
    pub grammar: Option<PathBuf>,
    /// Seed declarations file; the shipped seed if unset.
    pub context_seed: Option<PathBuf>,
    pub sampler: SamplerConfig,
    pub ga: GaConfig,
    pub compiler_a: CompilerSpec,
    pub compiler_b: CompilerSpec,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            algorithm: Algorithm::Rs,
            budget: 60.0,
            max_programs: None,
            seed: 0,
            workers: 0,
            snapshot_interval: 180.0,
            output: None,
            run_id: None,
            grammar: None,
            context_seed: None,
            sampler: SamplerConfig::default(),
            ga: GaConfig::default(),
            compiler_a: CompilerSpec::new("refc-ok", "refc {input} --profile none"),
            compiler_b: CompilerSpec::new("refc-bug", "refc {input} --profile all"),
        }
    }
}

impl CampaignConfig {
    /// Parses a TOML document, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, CampaignError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CampaignError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Config(m));
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return bad(format!("budget must be positive, got {}", self.budget));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval.is_finite()) {
            return bad(format!(
                "snapshot interval must be positive, got {}",
                self.snapshot_interval
            ));
        }
        if self.max_programs == Some(0) {
            return bad("max_programs must be positive".into());
        }
        self.sampler
            .validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        if self.algorithm != Algorithm::Rs {
            self.ga.validate().map_err(CampaignError::Config)?;
        }
        for spec in [&self.compiler_a, &self.compiler_b] {
            spec.validate().map_err(|e| CampaignError::Config(e.to_string()))?;
        }
        for path in [&self.grammar, &self.context_seed].into_iter().flatten() {
            if !path.is_file() {
                return bad(format!("{} does not exist", path.display()));
            }
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains('/') || id == "." || id == ".." {
                return bad(format!("invalid run id '{id}'"));
            }
        }
        Ok(())
    }

    pub fn effective_workers(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn effective_run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.algorithm, self.seed))
    }

    /// Loads the configured grammar profile and seed context, falling back
    /// to the shipped ones.
    pub fn load_inputs(&self) -> Result<(EnrichedGrammar, SemanticContext), CampaignError> {
        let read = |path: &Option<PathBuf>, shipped: &'static str| match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CampaignError::Config(format!("cannot read {}: {e}", p.display()))),
            None => Ok(shipped.to_string()),
        };
        let grammar = load_grammar(&read(&self.grammar, crate::assets::GRAMMAR_PROFILE)?)
            .map_err(|e| CampaignError::Config(format!("grammar: {e}")))?;
        let ctx = extract_context(&read(&self.context_seed, crate::assets::SEED)?)
            .map_err(|e| CampaignError::Config(format!("context seed: {e}")))?;
        Ok((grammar, ctx))
    }

    /// Hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Identity of a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layout_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub run_id: String,
    pub algorithm: Algorithm,
    pub seed: u64,
}

/// File names inside a run directory.
pub mod layout {
    pub const MANIFEST: &str = "manifest.json";
    pub const CONFIG: &str = "config.json";
    pub const PROGRAMS_DIR: &str = "programs";
    pub const PROGRAMS_LOG: &str = "programs.jsonl";
    pub const CAMPAIGN_LOG: &str = "campaign.jsonl";
    pub const EVOLUTION_LOG: &str = "evolution.jsonl";
    pub const SNAPSHOTS_DIR: &str = "snapshots";
    pub const DEFECTS_DIR: &str = "defects";
    pub const DEFECTS: &str = "defects.json";
    /// Final SODGA population or MODGA archive.
    pub const RESULT: &str = "result.jsonl";
    pub const SUMMARY: &str = "summary.json";
    pub const REPORT_DIR: &str = "report";

    pub fn program_file(id: u64) -> String {
        format!("{id}.kt")
    }
}
