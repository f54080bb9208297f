//! The five consistency and quality scores, each on a 0–100 scale, together
//! with the evidence they were computed from.

mod aesthetic;
mod alignment;
mod depth;
mod geometric;
mod semantic;
mod structural;

use serde::{Deserialize, Serialize};

use crate::backends::BackendError;

pub use aesthetic::{aesthetic_elo, aesthetic_mean, AestheticCalibration, EloRanking, PairOutcome};
pub use alignment::{text_3d_alignment, window_all_correct, AlignConfig, AlignEvidence};
pub use depth::{align_depth, align_depth_auto, depth_to_normal, AlignedDepth, MIN_ALIGN_PIXELS};
pub use geometric::{
    angular_map, geometric_consistency, pool_views, score_view, AngularMap, GeoConfig, GeoEvidence,
    Pooling,
};
pub use semantic::{
    calibrate_semantic_threshold, fuse_vertex_features, percentile, semantic_consistency,
    semantic_from_variances, FeatureAccumulator, SemConfig, SemEvidence, VertexSamples,
    MIN_CALIBRATION_SAMPLES,
};
pub use structural::{
    structural_consistency, structural_score, StructConfig, StructEvidence, StructView,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("too few valid pixels for depth alignment: {got} < {need}")]
    TooFewPixels { got: usize, need: usize },
    #[error("inverted depth: fitted scale {0} is not positive")]
    InvertedDepth(f64),
    #[error("degenerate depth prediction: constant over the mask")]
    ConstantDepth,
    #[error("no valid pixels")]
    NoValidPixels,
    #[error("no vertex is visible from at least {0} views")]
    NoVertices(u32),
    #[error("too few samples: {got} < {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("no questions")]
    NoQuestions,
    #[error("no scores")]
    NoScores,
    #[error("comparison graph is disconnected: {}", format_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no render at azimuth {0}°")]
    MissingRender(f64),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn format_components(c: &[Vec<String>]) -> String {
    c.iter()
        .map(|g| format!("{{{}}}", g.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// The five scores, by their short names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "geo")]
    Geometric,
    #[serde(rename = "sem")]
    Semantic,
    #[serde(rename = "struct")]
    Structural,
    #[serde(rename = "align")]
    Alignment,
    #[serde(rename = "aes")]
    Aesthetic,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Geometric,
        MetricKind::Semantic,
        MetricKind::Structural,
        MetricKind::Alignment,
        MetricKind::Aesthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Geometric => "geo",
            MetricKind::Semantic => "sem",
            MetricKind::Structural => "struct",
            MetricKind::Alignment => "align",
            MetricKind::Aesthetic => "aes",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A score in `[0, 100]` and the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore<E> {
    pub value: f64,
    pub evidence: E,
}

/// `100 · hits / total`.
pub(crate) fn percent(hits: usize, total: usize) -> f64 {
    100.0 * hits as f64 / total as f64
}
