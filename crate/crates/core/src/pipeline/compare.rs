use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{BackendSpec, RunConfig};
use super::report::RunReport;
use super::run::run_eval;
use super::PipelineError;
use crate::backends::images::load_png;
use crate::backends::{invoke, BackendKind, BackendRequest, BackendResponse};
use crate::metrics::{aesthetic_elo, EloRanking, MetricKind, PairOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    /// One run config per prompt; every model lists the same prompts in the
    /// same order.
    pub configs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareManifest {
    pub models: Vec<ModelEntry>,
    /// Pairwise judge; when present the aesthetic column is the normalized
    /// ELO instead of the per-view mean.
    #[serde(default)]
    pub judge: Option<BackendSpec>,
    #[serde(default)]
    pub stub_all: bool,
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl CompareManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut m: CompareManifest = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        m.base = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub name: String,
    /// Mean over prompts where the metric was computed; `None` if never.
    pub scores: BTreeMap<MetricKind, Option<f64>>,
    /// Number of prompts contributing to each mean.
    pub counts: BTreeMap<MetricKind, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub prompts: Vec<String>,
    pub rows: Vec<ModelRow>,
    pub elo: Option<EloRanking>,
}

fn prompt_dir(out: &Path, model: &str, i: usize) -> PathBuf {
    out.join(model).join(format!("prompt_{i:03}"))
}

/// Evaluates every model on every prompt and writes `leaderboard.json`.
pub fn compare_models(
    manifest: &CompareManifest,
    out_dir: &Path,
) -> Result<Leaderboard, PipelineError> {
    if manifest.models.len() < 2 {
        return Err(PipelineError::Config(
            "a comparison needs at least two models".into(),
        ));
    }
    let mut names: Vec<&str> = manifest.models.iter().map(|m| m.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(PipelineError::Config("duplicate model names".into()));
    }
    let mut prompts: Option<Vec<String>> = None;
    let mut reports: Vec<Vec<RunReport>> = Vec::new();
    for model in &manifest.models {
        let mut runs = Vec::new();
        for (i, path) in model.configs.iter().enumerate() {
            let mut cfg = RunConfig::load(manifest.resolve(path))?;
            cfg.apply_overrides(manifest.stub_all, None, None);
            runs.push(run_eval(&cfg, &prompt_dir(out_dir, &model.name, i))?);
        }
        let these: Vec<String> = runs.iter().map(|r| r.prompt.clone()).collect();
        match &prompts {
            None => prompts = Some(these),
            Some(p) if *p != these => {
                return Err(PipelineError::Config(format!(
                    "model {} was evaluated on a different prompt list",
                    model.name
                )))
            }
            Some(_) => {}
        }
        reports.push(runs);
    }
    let prompts = prompts.unwrap_or_default();

    let mut rows: Vec<ModelRow> = manifest
        .models
        .iter()
        .zip(&reports)
        .map(|(m, runs)| {
            let mut scores = BTreeMap::new();
            let mut counts = BTreeMap::new();
            for kind in MetricKind::ALL {
                let vals: Vec<f64> = runs.iter().filter_map(|r| r.value(kind)).collect();
                counts.insert(kind, vals.len());
                scores.insert(
                    kind,
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                );
            }
            ModelRow {
                name: m.name.clone(),
                scores,
                counts,
            }
        })
        .collect();

    let elo = match &manifest.judge {
        None => None,
        Some(spec) => {
            let judge = spec.build(BackendKind::Judge, "", &out_dir.join("jobs"));
            let mut outcomes = Vec::new();
            for (p, prompt) in prompts.iter().enumerate() {
                for a in 0..manifest.models.len() {
                    for b in a + 1..manifest.models.len() {
                        let (ma, mb) = (&manifest.models[a].name, &manifest.models[b].name);
                        let image = |m: &str| {
                            let path = prompt_dir(out_dir, m, p).join("summary/canonical_rgb.png");
                            load_png(&path).map_err(|e| {
                                PipelineError::Stage(
                                    "judge".into(),
                                    format!("{}: {e}", path.display()),
                                )
                            })
                        };
                        let req = BackendRequest::Judge {
                            prompt: prompt.clone(),
                            model_a: ma.clone(),
                            model_b: mb.clone(),
                            image_a: image(ma)?,
                            image_b: image(mb)?,
                        };
                        let verdict = match invoke(judge.as_ref(), &req) {
                            Ok(BackendResponse::Judge(v)) => v,
                            Ok(_) => unreachable!("invoke checks the response kind"),
                            Err(e) => {
                                return Err(PipelineError::Stage("judge".into(), e.to_string()))
                            }
                        };
                        outcomes.push(PairOutcome {
                            model_a: ma.clone(),
                            model_b: mb.clone(),
                            verdict,
                        });
                    }
                }
            }
            let ranking = aesthetic_elo(&outcomes)
                .map_err(|e| PipelineError::Stage("judge".into(), e.to_string()))?;
            for row in &mut rows {
                row.scores
                    .insert(MetricKind::Aesthetic, ranking.score_of(&row.name));
                row.counts.insert(MetricKind::Aesthetic, prompts.len());
            }
            Some(ranking)
        }
    };

    let board = Leaderboard { prompts, rows, elo };
    std::fs::create_dir_all(out_dir)?;
    let mut s = serde_json::to_string_pretty(&board)?;
    s.push('\n');
    std::fs::write(out_dir.join("leaderboard.json"), s)?;
    Ok(board)
}
