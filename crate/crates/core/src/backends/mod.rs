//! Foundation-model backends.
//!
//! Every model the metrics need (monocular depth, dense features, novel-view
//! synthesis, perceptual distance, question generation, VQA, aesthetic
//! scoring, pairwise judging) sits behind [`Backend`]. Real models run as
//! sidecar processes speaking the job-directory protocol in [`protocol`];
//! [`stubs`] provides deterministic in-process doubles with the same
//! contracts.

pub mod images;
pub mod process;
pub mod protocol;
pub mod stubs;
pub mod tensor;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camrig::CameraView;
use crate::raster::DepthMap;
pub use images::RgbImage;

/// Spatial size of feature maps returned by the features backend.
pub const FEATURE_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Depth,
    Features,
    Nvs,
    Perceptual,
    Qagen,
    Vqa,
    Aesthetic,
    Judge,
}

impl BackendKind {
    pub const ALL: [BackendKind; 8] = [
        BackendKind::Depth,
        BackendKind::Features,
        BackendKind::Nvs,
        BackendKind::Perceptual,
        BackendKind::Qagen,
        BackendKind::Vqa,
        BackendKind::Aesthetic,
        BackendKind::Judge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Depth => "depth",
            BackendKind::Features => "features",
            BackendKind::Nvs => "nvs",
            BackendKind::Perceptual => "perceptual",
            BackendKind::Qagen => "qagen",
            BackendKind::Vqa => "vqa",
            BackendKind::Aesthetic => "aesthetic",
            BackendKind::Judge => "judge",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("tensor error: {0}")]
    Tensor(#[from] tensor::TensorError),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("failed to launch {command}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend exited with status {status}; stderr tail:\n{stderr}")]
    Exit { status: String, stderr: String },
    #[error("backend timed out after {secs} s; stderr tail:\n{stderr}")]
    Timeout { secs: u64, stderr: String },
    #[error("missing output {0:?}")]
    MissingOutput(String),
    #[error("missing input {0:?}")]
    MissingInput(String),
    #[error("{0}")]
    Contract(String),
    #[error("backend reported error: {0}")]
    Remote(String),
    #[error("stub lookup miss: {0}")]
    StubMiss(String),
    #[error("kind mismatch: expected {expected}, got {got}")]
    KindMismatch {
        expected: BackendKind,
        got: BackendKind,
    },
}

/// One multiple-choice question with its gold answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAItem {
    pub question: String,
    pub choices: Vec<String>,
    pub gold: String,
}

impl QAItem {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.choices.len() < 2 {
            return Err(BackendError::Contract(format!(
                "question {:?} has fewer than 2 choices",
                self.question
            )));
        }
        if !self.choices.contains(&self.gold) {
            return Err(BackendError::Contract(format!(
                "gold answer {:?} is not among the choices",
                self.gold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthConvention {
    #[default]
    Depth,
    Disparity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeVerdict {
    A,
    B,
    Tie,
}

/// Dense `channels × size × size` feature map, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub size: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn constant(channels: usize, value: f32) -> Self {
        Self::per_channel(&vec![value; channels])
    }

    /// Spatially constant map with one value per channel.
    pub fn per_channel(values: &[f32]) -> Self {
        let plane = FEATURE_SIZE * FEATURE_SIZE;
        let mut data = Vec::with_capacity(values.len() * plane);
        for &v in values {
            data.extend(std::iter::repeat_n(v, plane));
        }
        Self {
            channels: values.len(),
            size: FEATURE_SIZE,
            data,
        }
    }

    pub fn at(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.size + y) * self.size + x]
    }

    /// Bilinear sample at continuous feature-pixel coordinates where pixel
    /// `(i, j)` has its center at `(i + 0.5, j + 0.5)`. Clamps at borders.
    pub fn sample(&self, x: f64, y: f64, out: &mut Vec<f32>) {
        let max = (self.size - 1) as f64;
        let fx = (x - 0.5).clamp(0.0, max);
        let fy = (y - 0.5).clamp(0.0, max);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.size - 1), (y0 + 1).min(self.size - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        out.clear();
        for c in 0..self.channels {
            let top = self.at(c, x0, y0) as f64 * (1.0 - tx) + self.at(c, x1, y0) as f64 * tx;
            let bot = self.at(c, x0, y1) as f64 * (1.0 - tx) + self.at(c, x1, y1) as f64 * tx;
            out.push((top * (1.0 - ty) + bot * ty) as f32);
        }
    }
}

/// A typed backend call.
#[derive(Debug, Clone)]
pub enum BackendRequest {
    Depth {
        view: CameraView,
        image: RgbImage,
        /// The engine's own rendered depth; real adapters ignore it.
        reference_depth: Option<DepthMap>,
    },
    Features {
        view: CameraView,
        image: RgbImage,
    },
    Nvs {
        source_view: CameraView,
        target_view: CameraView,
        source: RgbImage,
        /// The engine's own image at the target pose; real adapters ignore it.
        reference: Option<RgbImage>,
    },
    Perceptual {
        a: RgbImage,
        b: RgbImage,
    },
    Qagen {
        prompt: String,
    },
    Vqa {
        view: CameraView,
        image: RgbImage,
        question: String,
        choices: Vec<String>,
    },
    Aesthetic {
        view: CameraView,
        image: RgbImage,
        prompt: String,
    },
    Judge {
        prompt: String,
        model_a: String,
        model_b: String,
        image_a: RgbImage,
        image_b: RgbImage,
    },
}

impl BackendRequest {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendRequest::Depth { .. } => BackendKind::Depth,
            BackendRequest::Features { .. } => BackendKind::Features,
            BackendRequest::Nvs { .. } => BackendKind::Nvs,
            BackendRequest::Perceptual { .. } => BackendKind::Perceptual,
            BackendRequest::Qagen { .. } => BackendKind::Qagen,
            BackendRequest::Vqa { .. } => BackendKind::Vqa,
            BackendRequest::Aesthetic { .. } => BackendKind::Aesthetic,
            BackendRequest::Judge { .. } => BackendKind::Judge,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendResponse {
    Depth {
        depth: DepthMap,
        convention: DepthConvention,
    },
    Features(FeatureMap),
    Nvs(RgbImage),
    Perceptual(f64),
    Qagen(Vec<QAItem>),
    Vqa(String),
    Aesthetic(f64),
    Judge(JudgeVerdict),
}

impl BackendResponse {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendResponse::Depth { .. } => BackendKind::Depth,
            BackendResponse::Features(_) => BackendKind::Features,
            BackendResponse::Nvs(_) => BackendKind::Nvs,
            BackendResponse::Perceptual(_) => BackendKind::Perceptual,
            BackendResponse::Qagen(_) => BackendKind::Qagen,
            BackendResponse::Vqa(_) => BackendKind::Vqa,
            BackendResponse::Aesthetic(_) => BackendKind::Aesthetic,
            BackendResponse::Judge(_) => BackendKind::Judge,
        }
    }
}

/// Checks a response against the shape contract of its request.
pub fn validate_response(req: &BackendRequest, resp: &BackendResponse) -> Result<(), BackendError> {
    if req.kind() != resp.kind() {
        return Err(BackendError::KindMismatch {
            expected: req.kind(),
            got: resp.kind(),
        });
    }
    let violated = |m: String| {
        Err(BackendError::Contract(format!(
            "shape contract violated: {m}"
        )))
    };
    match (req, resp) {
        (BackendRequest::Depth { image, .. }, BackendResponse::Depth { depth, .. }) => {
            if (depth.width, depth.height) != image.dimensions() {
                return violated(format!(
                    "expected depth {}×{}, got {}×{}",
                    image.height(),
                    image.width(),
                    depth.height,
                    depth.width
                ));
            }
        }
        (BackendRequest::Features { .. }, BackendResponse::Features(f)) => {
            if f.size != FEATURE_SIZE
                || f.channels == 0
                || f.data.len() != f.channels * f.size * f.size
            {
                return violated(format!(
                    "expected C×{FEATURE_SIZE}×{FEATURE_SIZE}, got {}×{}×{}",
                    f.channels, f.size, f.size
                ));
            }
        }
        (BackendRequest::Nvs { source, .. }, BackendResponse::Nvs(img)) => {
            if img.dimensions() != source.dimensions() {
                return violated(format!(
                    "expected novel view {:?}, got {:?}",
                    source.dimensions(),
                    img.dimensions()
                ));
            }
        }
        (BackendRequest::Perceptual { .. }, BackendResponse::Perceptual(d)) => {
            if !(0.0..=1.0).contains(d) {
                return Err(BackendError::Contract(format!(
                    "perceptual distance {d} outside [0, 1]"
                )));
            }
        }
        (BackendRequest::Qagen { .. }, BackendResponse::Qagen(items)) => {
            for item in items {
                item.validate()?;
            }
        }
        (BackendRequest::Vqa { choices, .. }, BackendResponse::Vqa(answer)) => {
            if !choices.contains(answer) {
                return Err(BackendError::Contract(format!(
                    "answer {answer:?} is not one of the choices"
                )));
            }
        }
        (BackendRequest::Aesthetic { .. }, BackendResponse::Aesthetic(s)) if !s.is_finite() => {
            return Err(BackendError::Contract("non-finite aesthetic score".into()));
        }
        _ => {}
    }
    Ok(())
}

/// Anything that can answer backend requests of one kind.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Human-readable identity recorded in run reports.
    fn identity(&self) -> String;

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

/// Calls `backend` and validates the response against the request.
pub fn invoke(
    backend: &dyn Backend,
    req: &BackendRequest,
) -> Result<BackendResponse, BackendError> {
    if backend.kind() != req.kind() {
        return Err(BackendError::KindMismatch {
            expected: backend.kind(),
            got: req.kind(),
        });
    }
    let resp = backend.call(req)?;
    validate_response(req, &resp)?;
    Ok(resp)
}
