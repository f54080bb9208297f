//! Run configuration, orchestration of the five metrics over one asset, and
//! multi-model comparison.

mod compare;
mod config;
mod report;
mod run;

use thiserror::Error;

use crate::assets::MeshError;

pub use compare::{compare_models, CompareManifest, Leaderboard, ModelEntry, ModelRow};
pub use config::{AesConfig, BackendSpec, LocalizeConfig, RunConfig};
pub use report::{MeshSummary, RunReport, Slot, Timings, REPORT_VERSION};
pub use run::run_eval;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("mesh {0}: {1}")]
    Mesh(String, #[source] MeshError),
    #[error("{0}: {1}")]
    Stage(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
