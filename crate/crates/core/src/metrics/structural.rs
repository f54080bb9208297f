//! Plausibility of novel views synthesized from a few input views.

use serde::{Deserialize, Serialize};

use super::{MetricError, MetricScore, Result};
use crate::backends::{invoke, Backend, BackendRequest, BackendResponse, RgbImage};
use crate::camrig::CameraView;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructConfig {
    pub input_azimuths: Vec<f64>,
    /// Azimuth step between target views, starting at 0°.
    pub target_interval: f64,
    /// Elevation of the structural views; `None` uses the rig elevation.
    pub elevation: Option<f64>,
}

impl Default for StructConfig {
    fn default() -> Self {
        Self {
            input_azimuths: vec![0.0, 90.0],
            target_interval: 90.0,
            elevation: None,
        }
    }
}

impl StructConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.target_interval > 0.0
            && self.target_interval <= 360.0
            && (360.0 / self.target_interval).fract().abs() < 1e-9;
        if !ok {
            return Err(MetricError::Config(format!(
                "target_interval {} does not divide 360°",
                self.target_interval
            )));
        }
        if self.input_azimuths.is_empty() {
            return Err(MetricError::Config("no input azimuths".into()));
        }
        Ok(())
    }

    pub fn target_azimuths(&self) -> Vec<f64> {
        let n = (360.0 / self.target_interval).round() as usize;
        (0..n).map(|i| i as f64 * self.target_interval).collect()
    }

    /// Every azimuth that must be rendered: inputs then targets, deduplicated.
    pub fn required_azimuths(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for a in self.input_azimuths.iter().chain(&self.target_azimuths()) {
            if !out.iter().any(|b| same_azimuth(*a, *b)) {
                out.push(*a);
            }
        }
        out
    }
}

fn same_azimuth(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(360.0);
    d < 1e-6 || 360.0 - d < 1e-6
}

/// A view and its RGB image.
#[derive(Debug, Clone)]
pub struct StructView {
    pub view: CameraView,
    pub image: RgbImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructEvidence {
    pub input_azimuths: Vec<f64>,
    pub target_azimuths: Vec<f64>,
    /// `distances[a][j]`: perceptual distance from input `a` to target `j`.
    pub distances: Vec<Vec<f64>>,
    /// Mean similarity per input.
    pub per_input: Vec<f64>,
}

/// `100 · max_a mean_j (1 − d_aj)`.
pub fn structural_score(distances: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let per_input: Vec<f64> = distances
        .iter()
        .map(|row| row.iter().map(|d| 1.0 - d).sum::<f64>() / row.len() as f64)
        .collect();
    let best = per_input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (100.0 * best, per_input)
}

fn find(views: &[StructView], az: f64) -> Result<&StructView> {
    views
        .iter()
        .find(|v| same_azimuth(v.view.azimuth, az))
        .ok_or(MetricError::MissingRender(az))
}

/// Synthesizes each target from each input and scores the result against
/// the render at the target.
pub fn structural_consistency(
    views: &[StructView],
    nvs: &dyn Backend,
    perceptual: &dyn Backend,
    cfg: &StructConfig,
) -> Result<MetricScore<StructEvidence>> {
    cfg.validate()?;
    let targets = cfg.target_azimuths();
    let mut distances = Vec::with_capacity(cfg.input_azimuths.len());
    for &a in &cfg.input_azimuths {
        let src = find(views, a)?;
        let mut row = Vec::with_capacity(targets.len());
        for &t in &targets {
            let dst = find(views, t)?;
            let synth = match invoke(
                nvs,
                &BackendRequest::Nvs {
                    source_view: src.view.clone(),
                    target_view: dst.view.clone(),
                    source: src.image.clone(),
                    reference: Some(dst.image.clone()),
                },
            )? {
                BackendResponse::Nvs(img) => img,
                _ => unreachable!("invoke checks the response kind"),
            };
            let d = match invoke(
                perceptual,
                &BackendRequest::Perceptual {
                    a: synth,
                    b: dst.image.clone(),
                },
            )? {
                BackendResponse::Perceptual(d) => d,
                _ => unreachable!("invoke checks the response kind"),
            };
            row.push(d);
        }
        distances.push(row);
    }
    let (value, per_input) = structural_score(&distances);
    Ok(MetricScore {
        value,
        evidence: StructEvidence {
            input_azimuths: cfg.input_azimuths.clone(),
            target_azimuths: targets,
            distances,
            per_input,
        },
    })
}
