//! Benchmark prompt sets, human annotations, and agreement between metric
//! scores and human judgments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::metrics::MetricKind;

/// Published operating point for structural consistency scores.
pub const STRUCTURAL_THRESHOLD: f64 = 75.8;
/// Published operating point for semantic consistency scores.
pub const SEMANTIC_THRESHOLD: f64 = 63.3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("no comparable pairs")]
    NoPairs,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("{0} scores but {1} labels")]
    Length(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    SingleObject,
    MultiObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    EntityWhole,
    EntityPart,
    Attribute,
    Relation,
    Action,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub kind: ElementKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecord {
    pub id: String,
    pub text: String,
    pub category: Category,
    #[serde(default)]
    pub scene_graph: Vec<Element>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub records: Vec<PromptRecord>,
    pub counts: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Judgment {
    Yes,
    UncertainYes,
    UncertainNo,
    No,
}

/// How "uncertain" judgments become binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertainPolicy {
    /// Uncertain yes counts as yes, uncertain no as no.
    #[default]
    Collapse,
    /// Uncertain rows are discarded.
    Drop,
}

impl Judgment {
    pub fn label(self, policy: UncertainPolicy) -> Option<bool> {
        match (self, policy) {
            (Judgment::Yes, _) => Some(true),
            (Judgment::No, _) => Some(false),
            (Judgment::UncertainYes, UncertainPolicy::Collapse) => Some(true),
            (Judgment::UncertainNo, UncertainPolicy::Collapse) => Some(false),
            (_, UncertainPolicy::Drop) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// 0–9, higher is better.
    Rank(u8),
    Judgment(Judgment),
    /// One answer per generated question: whether the annotator agreed the
    /// asset shows it.
    Answers(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub prompt_id: String,
    pub model_id: String,
    pub metric: MetricKind,
    pub payload: Payload,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match (&self.metric, &self.payload) {
            (MetricKind::Geometric | MetricKind::Aesthetic, Payload::Rank(r)) => {
                if *r > 9 {
                    return Err(format!("rank {r} outside 0–9"));
                }
                true
            }
            (MetricKind::Semantic | MetricKind::Structural, Payload::Judgment(_)) => true,
            (MetricKind::Alignment, Payload::Answers(a)) => !a.is_empty(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("payload does not fit metric {}", self.metric))
        }
    }

    /// Scalar human score used for pairwise comparison, where defined.
    pub fn human_score(&self) -> Option<f64> {
        match &self.payload {
            Payload::Rank(r) => Some(*r as f64),
            Payload::Answers(a) => {
                Some(100.0 * a.iter().filter(|&&x| x).count() as f64 / a.len() as f64)
            }
            Payload::Judgment(_) => None,
        }
    }
}

/// One automatic score for a prompt/model/metric triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub prompt_id: String,
    pub model_id: String,
    pub metric: MetricKind,
    pub score: f64,
}

fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<Vec<T>, BenchError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(line).map_err(|e| BenchError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        check(&rec).map_err(|message| BenchError::Line {
            line: i + 1,
            message,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_promptset(path: impl AsRef<Path>) -> Result<PromptSet, BenchError> {
    let records: Vec<PromptRecord> = read_jsonl(path.as_ref(), |r: &PromptRecord| {
        if r.text.trim().is_empty() {
            Err("empty prompt text".into())
        } else {
            Ok(())
        }
    })?;
    if records.is_empty() {
        log::warn!("prompt set {} is empty", path.as_ref().display());
    }
    let mut counts = BTreeMap::new();
    for r in &records {
        *counts.entry(r.category).or_insert(0) += 1;
    }
    Ok(PromptSet { records, counts })
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, BenchError> {
    read_jsonl(path.as_ref(), AnnotationRecord::validate)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>, BenchError> {
    read_jsonl(path.as_ref(), |r: &ScoreRecord| {
        if r.score.is_finite() {
            Ok(())
        } else {
            Err("non-finite score".into())
        }
    })
}

/// Key of a score table: `(prompt id, model id)`.
pub type Key = (String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub percent: f64,
    pub agreeing: usize,
    pub pairs: usize,
}

/// Fraction of within-prompt model pairs on which the metric orders the two
/// models the same way as the humans. Pairs the humans tied are skipped; a
/// metric tie on a pair the humans separated counts as disagreement.
pub fn pairwise_agreement(
    metric: &BTreeMap<Key, f64>,
    human: &BTreeMap<Key, f64>,
) -> Result<Agreement, BenchError> {
    let mut by_prompt: BTreeMap<&str, Vec<(&str, f64, f64)>> = BTreeMap::new();
    for ((p, m), &h) in human {
        if let Some(&s) = metric.get(&(p.clone(), m.clone())) {
            by_prompt.entry(p).or_default().push((m, s, h));
        }
    }
    let (mut agreeing, mut pairs) = (0, 0);
    for models in by_prompt.values() {
        for i in 0..models.len() {
            for j in i + 1..models.len() {
                let (_, si, hi) = models[i];
                let (_, sj, hj) = models[j];
                if hi == hj {
                    continue;
                }
                pairs += 1;
                let ds = si - sj;
                if ds != 0.0 && (ds > 0.0) == (hi > hj) {
                    agreeing += 1;
                }
            }
        }
    }
    if pairs == 0 {
        return Err(BenchError::NoPairs);
    }
    Ok(Agreement {
        percent: 100.0 * agreeing as f64 / pairs as f64,
        agreeing,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Accuracy of predicting "yes" for `score ≥ threshold`.
pub fn accuracy_at(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == l)
        .count();
    100.0 * hits as f64 / scores.len() as f64
}

/// Best accuracy over thresholds at every midpoint between consecutive
/// distinct scores, plus one threshold below and one above all scores (the
/// constant predictors). Ties go to the lowest threshold.
pub fn threshold_sweep(scores: &[f64], labels: &[bool]) -> Result<Sweep, BenchError> {
    if scores.len() != labels.len() {
        return Err(BenchError::Length(scores.len(), labels.len()));
    }
    if !(labels.contains(&true) && labels.contains(&false)) {
        return Err(BenchError::SingleClass);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(sorted[sorted.len() - 1] + 1.0);
    let mut best = Sweep {
        threshold: candidates[0],
        accuracy: accuracy_at(scores, labels, candidates[0]),
    };
    for &t in &candidates[1..] {
        let a = accuracy_at(scores, labels, t);
        if a > best.accuracy {
            best = Sweep {
                threshold: t,
                accuracy: a,
            };
        }
    }
    Ok(best)
}

/// Fixed thresholds applied to binary-judged metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingPoints {
    pub structural: f64,
    pub semantic: f64,
}

impl Default for OperatingPoints {
    fn default() -> Self {
        Self {
            structural: STRUCTURAL_THRESHOLD,
            semantic: SEMANTIC_THRESHOLD,
        }
    }
}

impl OperatingPoints {
    pub fn for_metric(&self, m: MetricKind) -> Option<f64> {
        match m {
            MetricKind::Structural => Some(self.structural),
            MetricKind::Semantic => Some(self.semantic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAgreement {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Agreement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    /// Accuracy at the fixed operating point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Sweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Agreement statistics per metric: pairwise agreement for ranked metrics
/// and threshold analysis for binary-judged ones.
pub fn agreement_report(
    scores: &[ScoreRecord],
    annotations: &[AnnotationRecord],
    policy: UncertainPolicy,
    points: &OperatingPoints,
) -> BTreeMap<MetricKind, MetricAgreement> {
    let mut out = BTreeMap::new();
    for kind in MetricKind::ALL {
        let metric: BTreeMap<Key, f64> = scores
            .iter()
            .filter(|s| s.metric == kind)
            .map(|s| ((s.prompt_id.clone(), s.model_id.clone()), s.score))
            .collect();
        let anns: Vec<&AnnotationRecord> =
            annotations.iter().filter(|a| a.metric == kind).collect();
        if metric.is_empty() || anns.is_empty() {
            continue;
        }
        let mut entry = MetricAgreement {
            pairwise: None,
            sweep: None,
            fixed: None,
            error: None,
        };
        match kind {
            MetricKind::Semantic | MetricKind::Structural => {
                let (mut s, mut l) = (Vec::new(), Vec::new());
                for a in anns {
                    let Payload::Judgment(j) = a.payload else {
                        continue;
                    };
                    let key = (a.prompt_id.clone(), a.model_id.clone());
                    if let (Some(label), Some(&score)) = (j.label(policy), metric.get(&key)) {
                        s.push(score);
                        l.push(label);
                    }
                }
                match threshold_sweep(&s, &l) {
                    Ok(sw) => entry.sweep = Some(sw),
                    Err(e) => entry.error = Some(e.to_string()),
                }
                if let (Some(t), false) = (points.for_metric(kind), s.is_empty()) {
                    entry.fixed = Some(Sweep {
                        threshold: t,
                        accuracy: accuracy_at(&s, &l, t),
                    });
                }
            }
            _ => {
                let human: BTreeMap<Key, f64> = anns
                    .iter()
                    .filter_map(|a| {
                        a.human_score()
                            .map(|h| ((a.prompt_id.clone(), a.model_id.clone()), h))
                    })
                    .collect();
                match pairwise_agreement(&metric, &human) {
                    Ok(a) => entry.pairwise = Some(a),
                    Err(e) => entry.error = Some(e.to_string()),
                }
            }
        }
        out.insert(kind, entry);
    }
    out
}
