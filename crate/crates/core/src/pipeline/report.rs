use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::metrics::MetricKind;

pub const REPORT_VERSION: u32 = 1;

/// Outcome of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Slot {
    Ok {
        value: f64,
        #[serde(default)]
        details: serde_json::Value,
    },
    Skipped {
        reason: String,
    },
}

impl Slot {
    pub fn skipped(reason: impl Into<String>) -> Self {
        Slot::Skipped {
            reason: reason.into(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Slot::Ok { value, .. } => Some(*value),
            Slot::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub path: String,
    pub vertices: usize,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub total_s: f64,
    pub stages: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub prompt: String,
    pub mesh: MeshSummary,
    pub config: RunConfig,
    pub metrics: BTreeMap<MetricKind, Slot>,
    /// Identity of every backend that was configured, by kind name.
    pub backends: BTreeMap<String, String>,
    /// Files written by the run, relative to the output directory.
    pub artifacts: Vec<String>,
    pub timings: Timings,
}

impl RunReport {
    pub fn value(&self, m: MetricKind) -> Option<f64> {
        self.metrics.get(&m).and_then(Slot::value)
    }

    /// 0 when every requested metric was computed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        let all = self.config.metrics.iter().all(|m| self.value(*m).is_some());
        if all {
            0
        } else {
            2
        }
    }
}
