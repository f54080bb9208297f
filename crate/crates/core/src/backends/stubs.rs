//! Deterministic in-process backends with the same contracts as the real
//! sidecars. Scripted stubs fail loudly on a lookup miss.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::images::{grayscale, normalized_cross_correlation};
use super::{
    Backend, BackendError, BackendKind, BackendRequest, BackendResponse, DepthConvention,
    FeatureMap, JudgeVerdict, QAItem,
};

fn wrong_kind(expected: BackendKind, req: &BackendRequest) -> BackendError {
    BackendError::KindMismatch {
        expected,
        got: req.kind(),
    }
}

/// Echoes the reference depth carried by the request.
#[derive(Debug, Clone, Default)]
pub struct StubDepth {
    /// Emit `1 / depth` and declare the disparity convention.
    pub disparity: bool,
}

impl Backend for StubDepth {
    fn kind(&self) -> BackendKind {
        BackendKind::Depth
    }

    fn identity(&self) -> String {
        "stub:depth".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Depth {
            reference_depth, ..
        } = req
        else {
            return Err(wrong_kind(BackendKind::Depth, req));
        };
        let depth = reference_depth
            .clone()
            .ok_or_else(|| BackendError::MissingInput("reference_depth".into()))?;
        if self.disparity {
            let mut d = depth;
            for x in d.data.iter_mut() {
                *x = if *x > 0.0 { 1.0 / *x } else { 0.0 };
            }
            return Ok(BackendResponse::Depth {
                depth: d,
                convention: DepthConvention::Disparity,
            });
        }
        Ok(BackendResponse::Depth {
            depth,
            convention: DepthConvention::Depth,
        })
    }
}

/// Spatially constant feature maps.
#[derive(Debug, Clone)]
pub enum StubFeatures {
    Constant {
        channels: usize,
        value: f32,
    },
    /// Per-view channel values keyed by camera id.
    PerView(BTreeMap<u32, Vec<f32>>),
}

impl Backend for StubFeatures {
    fn kind(&self) -> BackendKind {
        BackendKind::Features
    }

    fn identity(&self) -> String {
        "stub:features".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Features { view, .. } = req else {
            return Err(wrong_kind(BackendKind::Features, req));
        };
        let map = match self {
            StubFeatures::Constant { channels, value } => FeatureMap::constant(*channels, *value),
            StubFeatures::PerView(table) => {
                FeatureMap::per_channel(table.get(&view.id).ok_or_else(|| {
                    BackendError::StubMiss(format!("features for view {}", view.id))
                })?)
            }
        };
        Ok(BackendResponse::Features(map))
    }
}

/// Returns the engine's own image at the target pose.
#[derive(Debug, Clone, Default)]
pub struct StubNvs;

impl Backend for StubNvs {
    fn kind(&self) -> BackendKind {
        BackendKind::Nvs
    }

    fn identity(&self) -> String {
        "stub:nvs".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Nvs { reference, .. } = req else {
            return Err(wrong_kind(BackendKind::Nvs, req));
        };
        reference
            .clone()
            .map(BackendResponse::Nvs)
            .ok_or_else(|| BackendError::MissingInput("reference".into()))
    }
}

/// `1 − NCC` of the grayscale images, clamped to [0, 1].
///
/// Two constant images are at distance 0 when identical and 1 otherwise.
#[derive(Debug, Clone, Default)]
pub struct StubPerceptual;

pub fn ncc_distance(a: &super::RgbImage, b: &super::RgbImage) -> f64 {
    if a.dimensions() != b.dimensions() {
        return 1.0;
    }
    if a == b {
        return 0.0;
    }
    match normalized_cross_correlation(&grayscale(a), &grayscale(b)) {
        Some(ncc) => (1.0 - ncc).clamp(0.0, 1.0),
        None => 1.0,
    }
}

impl Backend for StubPerceptual {
    fn kind(&self) -> BackendKind {
        BackendKind::Perceptual
    }

    fn identity(&self) -> String {
        "stub:perceptual".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Perceptual { a, b } = req else {
            return Err(wrong_kind(BackendKind::Perceptual, req));
        };
        Ok(BackendResponse::Perceptual(ncc_distance(a, b)))
    }
}

/// Question sets looked up by exact prompt text.
#[derive(Debug, Clone, Default)]
pub struct StubQaGen {
    pub table: BTreeMap<String, Vec<QAItem>>,
}

impl StubQaGen {
    pub fn with(prompt: &str, items: Vec<QAItem>) -> Self {
        Self {
            table: BTreeMap::from([(prompt.to_string(), items)]),
        }
    }

    /// One yes/no existence question for `prompt` with gold answer "yes".
    pub fn template(prompt: &str) -> Self {
        Self::with(prompt, vec![template_question(prompt)])
    }
}

pub fn template_question(prompt: &str) -> QAItem {
    QAItem {
        question: format!("Does the image show {prompt}?"),
        choices: vec!["yes".into(), "no".into()],
        gold: "yes".into(),
    }
}

impl Backend for StubQaGen {
    fn kind(&self) -> BackendKind {
        BackendKind::Qagen
    }

    fn identity(&self) -> String {
        "stub:qagen".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Qagen { prompt } = req else {
            return Err(wrong_kind(BackendKind::Qagen, req));
        };
        self.table
            .get(prompt)
            .cloned()
            .map(BackendResponse::Qagen)
            .ok_or_else(|| BackendError::StubMiss(format!("questions for prompt {prompt:?}")))
    }
}

/// Answers keyed by `(view id, question)`, falling back to per-question
/// answers valid for every view.
#[derive(Debug, Clone, Default)]
pub struct StubVqa {
    pub by_view: BTreeMap<(u32, String), String>,
    pub by_question: BTreeMap<String, String>,
}

impl StubVqa {
    /// Answers every question with its gold answer in every view.
    pub fn answering_gold(items: &[QAItem]) -> Self {
        Self {
            by_view: BTreeMap::new(),
            by_question: items
                .iter()
                .map(|q| (q.question.clone(), q.gold.clone()))
                .collect(),
        }
    }
}

impl Backend for StubVqa {
    fn kind(&self) -> BackendKind {
        BackendKind::Vqa
    }

    fn identity(&self) -> String {
        "stub:vqa".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Vqa { view, question, .. } = req else {
            return Err(wrong_kind(BackendKind::Vqa, req));
        };
        self.by_view
            .get(&(view.id, question.clone()))
            .or_else(|| self.by_question.get(question))
            .cloned()
            .map(BackendResponse::Vqa)
            .ok_or_else(|| {
                BackendError::StubMiss(format!("answer for view {} question {question:?}", view.id))
            })
    }
}

#[derive(Debug, Clone)]
pub struct StubAesthetic {
    pub score: f64,
}

impl Backend for StubAesthetic {
    fn kind(&self) -> BackendKind {
        BackendKind::Aesthetic
    }

    fn identity(&self) -> String {
        "stub:aesthetic".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        match req {
            BackendRequest::Aesthetic { .. } => Ok(BackendResponse::Aesthetic(self.score)),
            _ => Err(wrong_kind(BackendKind::Aesthetic, req)),
        }
    }
}

/// Pairwise judge following a fixed ranking: the model listed earlier wins.
#[derive(Debug, Clone, Default)]
pub struct StubJudge {
    pub ranking: Vec<String>,
}

impl Backend for StubJudge {
    fn kind(&self) -> BackendKind {
        BackendKind::Judge
    }

    fn identity(&self) -> String {
        "stub:judge".into()
    }

    fn call(&self, req: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let BackendRequest::Judge {
            model_a, model_b, ..
        } = req
        else {
            return Err(wrong_kind(BackendKind::Judge, req));
        };
        let rank = |m: &String| {
            self.ranking
                .iter()
                .position(|r| r == m)
                .ok_or_else(|| BackendError::StubMiss(format!("judge ranking has no model {m:?}")))
        };
        let (ra, rb) = (rank(model_a)?, rank(model_b)?);
        Ok(BackendResponse::Judge(match ra.cmp(&rb) {
            std::cmp::Ordering::Less => JudgeVerdict::A,
            std::cmp::Ordering::Greater => JudgeVerdict::B,
            std::cmp::Ordering::Equal => JudgeVerdict::Tie,
        }))
    }
}

/// Stub parameters as they appear in run configs and on the `stub-serve`
/// command line. Unused fields are ignored by the kinds that do not need them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StubOptions {
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub disparity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_view: Option<BTreeMap<u32, Vec<f32>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub questions: Option<Vec<QAItem>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answers: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<String>>,
}

/// Builds the stub for `kind`. `prompt` seeds the question generator when no
/// explicit questions are given.
pub fn build_stub(kind: BackendKind, opts: &StubOptions, prompt: &str) -> Box<dyn Backend> {
    let questions = opts
        .questions
        .clone()
        .unwrap_or_else(|| vec![template_question(prompt)]);
    match kind {
        BackendKind::Depth => Box::new(StubDepth {
            disparity: opts.disparity,
        }),
        BackendKind::Features => match &opts.per_view {
            Some(table) => Box::new(StubFeatures::PerView(table.clone())),
            None => Box::new(StubFeatures::Constant {
                channels: opts.channels.unwrap_or(8),
                value: opts.value.unwrap_or(0.5),
            }),
        },
        BackendKind::Nvs => Box::new(StubNvs),
        BackendKind::Perceptual => Box::new(StubPerceptual),
        BackendKind::Qagen => Box::new(StubQaGen::with(prompt, questions)),
        BackendKind::Vqa => Box::new(match &opts.answers {
            Some(a) => StubVqa {
                by_view: BTreeMap::new(),
                by_question: a.clone(),
            },
            None => StubVqa::answering_gold(&questions),
        }),
        BackendKind::Aesthetic => Box::new(StubAesthetic {
            score: opts.score.unwrap_or(1.0),
        }),
        BackendKind::Judge => Box::new(StubJudge {
            ranking: opts.ranking.clone().unwrap_or_default(),
        }),
    }
}
