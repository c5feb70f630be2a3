//! Experiment plumbing: config files, synthetic catalogs, the run modes and
//! their CSV artifacts.

mod config;
mod io;
mod run;
mod synth;

pub use config::{
    CatalogSource, ConfigDoc, ExperimentConfig, Mode, PolicyBlock, Section, UserSpec,
    DEFAULT_EPSILON, POLICY_NAMES, SESSION_THETA2, SESSION_THETA3,
};
pub use io::{
    read_csv, read_manifest, write_csv, CaseAggregateRecord, LossRecord, Manifest,
    PageComparisonRecord, PageDcgRecord, ScoreRecord, SessionRecord, MANIFEST_NAME,
};
pub use run::{page_label, report, run, RunSummary, RANDOM_INTENT};
pub use synth::{synthesize_catalog, SynthSpec};

use thiserror::Error;

use crate::catalog::CatalogError;
use crate::metrics::MetricsError;
use crate::pretrain::TrainError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad invocation or configuration; the CLI maps this to exit status 2.
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("infeasible synthesis spec: {0}")]
    Synth(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{0}")]
    Artifact(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl HarnessError {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        HarnessError::Config {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for errors caused by the invocation rather than the run.
    pub fn is_usage(&self) -> bool {
        matches!(self, HarnessError::Usage(_) | HarnessError::Config { .. })
    }
}
