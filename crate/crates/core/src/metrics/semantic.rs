//! Cross-view variance of features sampled at mesh vertices.

use serde::{Deserialize, Serialize};

use super::{percent, MetricError, MetricScore, Result};
use crate::assets::TriMesh;
use crate::backends::FeatureMap;
use crate::camrig::CameraView;
use crate::raster::VisibilityTable;

pub const MIN_CALIBRATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemConfig {
    /// Variance threshold. Uncalibrated default; see
    /// [`calibrate_semantic_threshold`].
    pub delta_dino: f64,
    pub min_visibility: u32,
}

impl Default for SemConfig {
    fn default() -> Self {
        Self {
            delta_dino: 0.05,
            min_visibility: 5,
        }
    }
}

impl SemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_dino > 0.0 && self.delta_dino.is_finite()) {
            return Err(MetricError::Config(format!(
                "delta_dino must be positive, got {}",
                self.delta_dino
            )));
        }
        Ok(())
    }
}

/// Feature samples of every vertex seen by enough views:
/// `samples[k][view][channel]` belongs to vertex `included[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSamples {
    pub n_vertices: usize,
    pub channels: usize,
    pub included: Vec<usize>,
    pub samples: Vec<Vec<Vec<f32>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemEvidence {
    /// Mean per-channel variance per mesh vertex; `None` means no data.
    pub variances: Vec<Option<f64>>,
}

/// Maps an image-plane position onto feature-map coordinates.
fn to_feature(view: &CameraView, map: &FeatureMap, u: f64, v: f64) -> (f64, f64) {
    (
        u * map.size as f64 / view.width as f64,
        v * map.size as f64 / view.height as f64,
    )
}

fn check_inputs(
    mesh: &TriMesh,
    views: &[CameraView],
    maps: &[FeatureMap],
    vis: &VisibilityTable,
) -> Result<usize> {
    if views.len() != maps.len()
        || vis.n_views != views.len()
        || vis.n_vertices != mesh.vertex_count()
    {
        return Err(MetricError::Shape(format!(
            "{} views, {} feature maps, visibility over {} views × {} vertices",
            views.len(),
            maps.len(),
            vis.n_views,
            vis.n_vertices
        )));
    }
    let channels = maps.first().map_or(0, |m| m.channels);
    if maps.iter().any(|m| m.channels != channels) {
        return Err(MetricError::Shape(
            "feature maps disagree on channel count".into(),
        ));
    }
    Ok(channels)
}

pub fn fuse_vertex_features(
    mesh: &TriMesh,
    views: &[CameraView],
    maps: &[FeatureMap],
    vis: &VisibilityTable,
    min_visibility: u32,
) -> Result<VertexSamples> {
    let channels = check_inputs(mesh, views, maps, vis)?;
    let mut included = Vec::new();
    let mut samples = Vec::new();
    let mut buf = Vec::with_capacity(channels);
    for (vi, p) in mesh.vertices.iter().enumerate() {
        if vis.count(vi) < min_visibility {
            continue;
        }
        let per_view = vis
            .views_of(vi)
            .map(|k| {
                let pr = views[k].project(p);
                let (x, y) = to_feature(&views[k], &maps[k], pr.u, pr.v);
                maps[k].sample(x, y, &mut buf);
                buf.clone()
            })
            .collect();
        included.push(vi);
        samples.push(per_view);
    }
    if included.is_empty() {
        return Err(MetricError::NoVertices(min_visibility));
    }
    Ok(VertexSamples {
        n_vertices: mesh.vertex_count(),
        channels,
        included,
        samples,
    })
}

/// Population variance per channel, averaged over channels.
fn mean_channel_variance(views: &[Vec<f32>], channels: usize) -> f64 {
    let n = views.len() as f64;
    let mut total = 0.0;
    for c in 0..channels {
        let mean = views.iter().map(|s| s[c] as f64).sum::<f64>() / n;
        total += views
            .iter()
            .map(|s| (s[c] as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
    }
    total / channels.max(1) as f64
}

/// Score from per-vertex mean variances; `None` entries are excluded.
pub fn semantic_from_variances(
    variances: Vec<Option<f64>>,
    delta: f64,
) -> Result<MetricScore<SemEvidence>> {
    let included: Vec<f64> = variances.iter().flatten().copied().collect();
    if included.is_empty() {
        return Err(MetricError::NoVertices(0));
    }
    let hits = included.iter().filter(|&&v| v < delta).count();
    Ok(MetricScore {
        value: percent(hits, included.len()),
        evidence: SemEvidence { variances },
    })
}

pub fn semantic_consistency(
    samples: &VertexSamples,
    cfg: &SemConfig,
) -> Result<MetricScore<SemEvidence>> {
    cfg.validate()?;
    let mut variances = vec![None; samples.n_vertices];
    for (&vi, views) in samples.included.iter().zip(&samples.samples) {
        variances[vi] = Some(mean_channel_variance(views, samples.channels));
    }
    semantic_from_variances(variances, cfg.delta_dino)
}

/// Streaming per-vertex, per-channel Welford accumulator. Views are folded
/// one at a time so that only one feature map needs to be resident.
#[derive(Debug, Clone)]
pub struct FeatureAccumulator {
    channels: usize,
    counts: Vec<u32>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl FeatureAccumulator {
    pub fn new(n_vertices: usize, channels: usize) -> Self {
        Self {
            channels,
            counts: vec![0; n_vertices],
            mean: vec![0.0; n_vertices * channels],
            m2: vec![0.0; n_vertices * channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Folds in view `k` of the rig the visibility table was built on.
    pub fn add_view(
        &mut self,
        mesh: &TriMesh,
        k: usize,
        view: &CameraView,
        map: &FeatureMap,
        vis: &VisibilityTable,
    ) -> Result<()> {
        let samples = Self::samples(mesh, view, map, &vis.view_flags(k));
        self.add_samples(&samples)
    }

    /// Feature samples of one view at the vertices flagged visible, as
    /// `(vertex, channels)` pairs in vertex order.
    pub fn samples(
        mesh: &TriMesh,
        view: &CameraView,
        map: &FeatureMap,
        visible: &[bool],
    ) -> Vec<(usize, Vec<f32>)> {
        let mut buf = Vec::with_capacity(map.channels);
        mesh.vertices
            .iter()
            .zip(visible)
            .enumerate()
            .filter(|(_, (_, &seen))| seen)
            .map(|(vi, (p, _))| {
                let pr = view.project(p);
                let (x, y) = to_feature(view, map, pr.u, pr.v);
                map.sample(x, y, &mut buf);
                (vi, buf.clone())
            })
            .collect()
    }

    pub fn add_samples(&mut self, samples: &[(usize, Vec<f32>)]) -> Result<()> {
        for (vi, feat) in samples {
            if feat.len() != self.channels {
                return Err(MetricError::Shape(format!(
                    "feature sample has {} channels, expected {}",
                    feat.len(),
                    self.channels
                )));
            }
            self.counts[*vi] += 1;
            let n = self.counts[*vi] as f64;
            let base = vi * self.channels;
            for (c, &s) in feat.iter().enumerate() {
                let s = s as f64;
                let d = s - self.mean[base + c];
                self.mean[base + c] += d / n;
                self.m2[base + c] += d * (s - self.mean[base + c]);
            }
        }
        Ok(())
    }

    /// Mean population variance per vertex seen by at least `min_visibility`
    /// views.
    pub fn variances(&self, min_visibility: u32) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(vi, &n)| {
                (n >= min_visibility.max(1)).then(|| {
                    let row = &self.m2[vi * self.channels..(vi + 1) * self.channels];
                    row.iter().map(|m| m / n as f64).sum::<f64>() / self.channels.max(1) as f64
                })
            })
            .collect()
    }
}

/// Linear-interpolation percentile (`q` in `[0, 100]`) of unsorted samples.
pub fn percentile(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(s[lo] + (s[hi] - s[lo]) * (rank - lo as f64))
}

/// 70th percentile of pooled per-vertex variances from held-out assets.
pub fn calibrate_semantic_threshold(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(MetricError::TooFewSamples {
            got: samples.len(),
            need: MIN_CALIBRATION_SAMPLES,
        });
    }
    Ok(percentile(samples, 70.0).expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::primitives::icosphere;
    use crate::backends::FEATURE_SIZE;
    use crate::camrig::{build_rig, RigSpec};
    use crate::raster::compute_visibility;
    use proptest::prelude::*;

    fn fixture(vals: &[Vec<Vec<f32>>]) -> VertexSamples {
        VertexSamples {
            n_vertices: vals.len(),
            channels: vals[0][0].len(),
            included: (0..vals.len()).collect(),
            samples: vals.to_vec(),
        }
    }

    #[test]
    fn identical_features_score_full() {
        let s = fixture(&vec![vec![vec![0.3, 0.7]; 4]; 10]);
        let r = semantic_consistency(&s, &SemConfig::default()).unwrap();
        assert_eq!(r.value, 100.0);
        assert!(r.evidence.variances.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn population_variance_of_0_1_2() {
        let s = fixture(&vec![vec![vec![0.0], vec![1.0], vec![2.0]]; 5]);
        let cfg = SemConfig {
            delta_dino: 1.0,
            ..Default::default()
        };
        let r = semantic_consistency(&s, &cfg).unwrap();
        assert_eq!(r.value, 100.0);
        let v = r.evidence.variances[0].unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn thirty_percent_hot_scores_seventy() {
        let delta = 0.5;
        let vars: Vec<Option<f64>> = (0..100)
            .map(|i| Some(if i < 30 { 2.0 * delta } else { 0.0 }))
            .collect();
        assert_eq!(semantic_from_variances(vars, delta).unwrap().value, 70.0);
    }

    #[test]
    fn percentile_matches_definition() {
        let s: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((calibrate_semantic_threshold(&s).unwrap() - 70.3).abs() < 1e-12);
        assert_eq!(calibrate_semantic_threshold(&[4.5; 120]).unwrap(), 4.5);
        assert!(matches!(
            calibrate_semantic_threshold(&[]),
            Err(MetricError::TooFewSamples { got: 0, .. })
        ));
    }

    fn sphere_setup(n_views: usize) -> (TriMesh, Vec<CameraView>, VisibilityTable) {
        let m = icosphere(2);
        let rig = build_rig(&RigSpec {
            n_views,
            resolution: 128,
            ..Default::default()
        })
        .unwrap();
        let vis = compute_visibility(&m, &rig);
        (m, rig, vis)
    }

    #[test]
    fn constant_maps_sample_constant() {
        let (m, rig, vis) = sphere_setup(6);
        let maps = vec![FeatureMap::per_channel(&[1.5, -2.0]); 6];
        let s = fuse_vertex_features(&m, &rig, &maps, &vis, 1).unwrap();
        for views in &s.samples {
            for v in views {
                assert_eq!(v, &vec![1.5, -2.0]);
            }
        }
    }

    #[test]
    fn gradient_map_sampled_at_pixel_centers() {
        let map = FeatureMap {
            channels: 1,
            size: FEATURE_SIZE,
            data: (0..FEATURE_SIZE * FEATURE_SIZE)
                .map(|i| (i % FEATURE_SIZE) as f32)
                .collect(),
        };
        let mut out = Vec::new();
        for i in [0usize, 17, 128, 255] {
            map.sample(i as f64 + 0.5, 40.5, &mut out);
            assert_eq!(out, vec![i as f32]);
        }
        // halfway between two centers
        map.sample(18.0, 3.5, &mut out);
        assert_eq!(out, vec![17.5]);
    }

    #[test]
    fn min_visibility_excludes_vertices() {
        let (m, rig, vis) = sphere_setup(8);
        let maps = vec![FeatureMap::constant(1, 0.0); 8];
        let s = fuse_vertex_features(&m, &rig, &maps, &vis, 3).unwrap();
        for (&vi, views) in s.included.iter().zip(&s.samples) {
            assert!(vis.count(vi) >= 3);
            assert_eq!(views.len(), vis.count(vi) as usize);
        }
        assert!(s.included.len() < m.vertex_count());
        assert!(matches!(
            fuse_vertex_features(&m, &rig, &maps, &vis, 9),
            Err(MetricError::NoVertices(9))
        ));
    }

    #[test]
    fn accumulator_matches_sample_path() {
        let (m, rig, vis) = sphere_setup(6);
        let maps: Vec<FeatureMap> = (0..6)
            .map(|k| FeatureMap::per_channel(&[k as f32, 1.0]))
            .collect();
        let s = fuse_vertex_features(&m, &rig, &maps, &vis, 2).unwrap();
        let direct = semantic_consistency(&s, &SemConfig::default()).unwrap();
        let mut acc = FeatureAccumulator::new(m.vertex_count(), 2);
        for k in 0..6 {
            acc.add_view(&m, k, &rig[k], &maps[k], &vis).unwrap();
        }
        let streamed = acc.variances(2);
        for (a, b) in direct.evidence.variances.iter().zip(&streamed) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
                (None, None) => {}
                _ => panic!("inclusion differs"),
            }
        }
    }

    proptest! {
        #[test]
        fn variance_is_shift_invariant(
            vals in prop::collection::vec(prop::collection::vec(-4.0f32..4.0, 3), 2..8),
            shift in prop::collection::vec(-100.0f32..100.0, 3),
        ) {
            let shifted: Vec<Vec<f32>> = vals
                .iter()
                .map(|v| v.iter().zip(&shift).map(|(a, s)| a + s).collect())
                .collect();
            let a = mean_channel_variance(&vals, 3);
            let b = mean_channel_variance(&shifted, 3);
            prop_assert!((a - b).abs() < 1e-3 * (1.0 + a));
        }

        #[test]
        fn score_in_range(vars in prop::collection::vec(0.0f64..2.0, 1..50), delta in 0.01f64..2.0) {
            let v = semantic_from_variances(vars.into_iter().map(Some).collect(), delta).unwrap().value;
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }
}
