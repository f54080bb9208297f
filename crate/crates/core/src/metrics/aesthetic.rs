//! Aesthetic scores: calibrated mean of per-view ratings, and a
//! Bradley–Terry ranking from pairwise judgments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricError, MetricScore, Result};
use crate::backends::JudgeVerdict;

/// Affine map from raw scorer output to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AestheticCalibration {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AestheticCalibration {
    fn default() -> Self {
        Self { lo: -2.0, hi: 2.0 }
    }
}

/// `100 · clamp((mean − lo) / (hi − lo), 0, 1)`. Evidence is the raw scores.
pub fn aesthetic_mean(raw: &[f64], cal: &AestheticCalibration) -> Result<MetricScore<Vec<f64>>> {
    if raw.is_empty() {
        return Err(MetricError::NoScores);
    }
    if !(cal.lo < cal.hi) {
        return Err(MetricError::Config(format!(
            "calibration lo {} must be below hi {}",
            cal.lo, cal.hi
        )));
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let value = 100.0 * ((mean - cal.lo) / (cal.hi - cal.lo)).clamp(0.0, 1.0);
    Ok(MetricScore {
        value,
        evidence: raw.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub model_a: String,
    pub model_b: String,
    pub verdict: JudgeVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloRanking {
    /// Sorted model names; the other vectors follow this order.
    pub models: Vec<String>,
    pub strength: Vec<f64>,
    /// `400 · log10(strength)`, centered on zero mean.
    pub elo: Vec<f64>,
    /// Min–max normalized to `[0, 100]`; 50 for every model when all tie.
    pub normalized: Vec<f64>,
}

impl EloRanking {
    pub fn score_of(&self, model: &str) -> Option<f64> {
        self.models
            .iter()
            .position(|m| m == model)
            .map(|i| self.normalized[i])
    }
}

/// Pseudo-games, split as a tie, added to every observed pair so that
/// strengths stay finite under perfect separation.
const PRIOR_GAMES: f64 = 1e-3;
const MAX_ITERS: usize = 100_000;

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Bradley–Terry maximum likelihood by minorization–maximization; ties count
/// as half a win for each side.
pub fn aesthetic_elo(outcomes: &[PairOutcome]) -> Result<EloRanking> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for o in outcomes {
        index.entry(&o.model_a).or_default();
        index.entry(&o.model_b).or_default();
    }
    if index.len() < 2 {
        return Err(MetricError::NoScores);
    }
    let models: Vec<String> = index.keys().map(|s| s.to_string()).collect();
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let n = models.len();
    let mut wins = vec![0.0f64; n];
    let mut games = vec![vec![0.0f64; n]; n];
    let mut parent: Vec<usize> = (0..n).collect();
    for o in outcomes {
        let (a, b) = (index[o.model_a.as_str()], index[o.model_b.as_str()]);
        if a == b {
            continue;
        }
        games[a][b] += 1.0;
        games[b][a] += 1.0;
        match o.verdict {
            JudgeVerdict::A => wins[a] += 1.0,
            JudgeVerdict::B => wins[b] += 1.0,
            JudgeVerdict::Tie => {
                wins[a] += 0.5;
                wins[b] += 0.5;
            }
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, m) in models.iter().enumerate() {
        groups
            .entry(find(&mut parent, i))
            .or_default()
            .push(m.clone());
    }
    if groups.len() > 1 {
        return Err(MetricError::Disconnected(groups.into_values().collect()));
    }
    for (row, w) in games.iter_mut().zip(wins.iter_mut()) {
        for g in row.iter_mut().filter(|g| **g > 0.0) {
            *g += PRIOR_GAMES;
            *w += PRIOR_GAMES / 2.0;
        }
    }

    let mut p = vec![1.0f64; n];
    for _ in 0..MAX_ITERS {
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| games[i][j] > 0.0)
                    .map(|j| games[i][j] / (p[i] + p[j]))
                    .sum();
                wins[i] / denom
            })
            .collect();
        let log_mean = next.iter().map(|x| x.ln()).sum::<f64>() / n as f64;
        for x in &mut next {
            *x /= log_mean.exp();
        }
        let delta = next
            .iter()
            .zip(&p)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        p = next;
        if delta < 1e-13 {
            break;
        }
    }

    let elo: Vec<f64> = p.iter().map(|s| 400.0 * s.log10()).collect();
    let (lo, hi) = elo
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| {
            (l.min(e), h.max(e))
        });
    let normalized = if hi - lo < 1e-6 {
        vec![50.0; n]
    } else {
        elo.iter()
            .map(|e| ((e - lo) / (hi - lo) * 100.0).clamp(0.0, 100.0))
            .collect()
    };
    Ok(EloRanking {
        models,
        strength: p,
        elo,
        normalized,
    })
}
