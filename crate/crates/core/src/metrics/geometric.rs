//! Agreement between analytic normals and normals predicted from depth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{percent, MetricError, MetricScore, Result};
use crate::raster::NormalMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One inlier ratio over every valid pixel of every view.
    #[default]
    Pooled,
    /// Mean of per-view inlier ratios over views with valid pixels.
    PerViewMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    /// Inlier threshold in degrees.
    pub delta_norm: f64,
    pub pooling: Pooling,
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            delta_norm: 23.0,
            pooling: Pooling::Pooled,
        }
    }
}

impl GeoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_norm > 0.0 && self.delta_norm < 90.0) {
            return Err(MetricError::Config(format!(
                "delta_norm must lie in (0, 90), got {}",
                self.delta_norm
            )));
        }
        Ok(())
    }
}

/// Per-pixel angle in degrees between two normal fields; `-1` marks pixels
/// outside the mask or where either normal is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl AngularMap {
    pub fn at(&self, i: usize) -> Option<f64> {
        let a = self.data[i];
        (a >= 0.0).then_some(a as f64)
    }

    /// `1 − cos θ`, the cosine distance between the two normals.
    pub fn cosine_distance(&self, i: usize) -> Option<f64> {
        self.at(i).map(|a| 1.0 - a.to_radians().cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoEvidence {
    pub maps: Vec<AngularMap>,
    pub inliers: Vec<usize>,
    pub valid: Vec<usize>,
}

fn angle_deg(a: &crate::Vec3, b: &crate::Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn angular_map(analytic: &NormalMap, predicted: &NormalMap, mask: &[bool]) -> AngularMap {
    let data = (0..analytic.len())
        .map(|i| match (mask[i], analytic.at(i), predicted.at(i)) {
            (true, Some(a), Some(p)) => angle_deg(&a.normalize(), &p.normalize()) as f32,
            _ => -1.0,
        })
        .collect();
    AngularMap {
        width: analytic.width,
        height: analytic.height,
        data,
    }
}

/// Angular map plus inlier and valid-pixel counts for one view. Inliers are
/// decided in f64 before the angle is rounded into the map.
pub fn score_view(
    analytic: &NormalMap,
    predicted: &NormalMap,
    mask: &[bool],
    delta_norm: f64,
) -> (AngularMap, usize, usize) {
    let mut map = AngularMap {
        width: analytic.width,
        height: analytic.height,
        data: vec![-1.0; analytic.len()],
    };
    let (mut inliers, mut valid) = (0, 0);
    for (i, &m) in mask.iter().enumerate().take(analytic.len()) {
        if let (true, Some(na), Some(np)) = (m, analytic.at(i), predicted.at(i)) {
            let ang = angle_deg(&na.normalize(), &np.normalize());
            map.data[i] = ang as f32;
            valid += 1;
            if ang < delta_norm {
                inliers += 1;
            }
        }
    }
    (map, inliers, valid)
}

/// Reduces per-view counts to a score.
pub fn pool_views(inliers: &[usize], valid: &[usize], pooling: Pooling) -> Result<f64> {
    let total_valid: usize = valid.iter().sum();
    if total_valid == 0 {
        return Err(MetricError::NoValidPixels);
    }
    Ok(match pooling {
        Pooling::Pooled => percent(inliers.iter().sum(), total_valid),
        Pooling::PerViewMean => {
            let ratios: Vec<f64> = inliers
                .iter()
                .zip(valid)
                .filter(|(_, &v)| v > 0)
                .map(|(&i, &v)| percent(i, v))
                .collect();
            ratios.iter().sum::<f64>() / ratios.len() as f64
        }
    })
}

/// Inlier ratio of normal agreement over a set of views.
pub fn geometric_consistency(
    analytic: &[NormalMap],
    predicted: &[NormalMap],
    masks: &[Vec<bool>],
    cfg: &GeoConfig,
) -> Result<MetricScore<GeoEvidence>> {
    cfg.validate()?;
    if analytic.len() != predicted.len() || analytic.len() != masks.len() {
        return Err(MetricError::Shape(format!(
            "{} analytic maps, {} predicted maps, {} masks",
            analytic.len(),
            predicted.len(),
            masks.len()
        )));
    }
    for (k, ((a, p), m)) in analytic.iter().zip(predicted).zip(masks).enumerate() {
        if a.len() != p.len() || a.len() != m.len() {
            return Err(MetricError::Shape(format!("view {k}: buffer sizes differ")));
        }
    }
    let per_view: Vec<(AngularMap, usize, usize)> = analytic
        .par_iter()
        .zip(predicted.par_iter())
        .zip(masks.par_iter())
        .map(|((a, p), m)| score_view(a, p, m, cfg.delta_norm))
        .collect();
    let inliers: Vec<usize> = per_view.iter().map(|v| v.1).collect();
    let valid: Vec<usize> = per_view.iter().map(|v| v.2).collect();
    let value = pool_views(&inliers, &valid, cfg.pooling)?;
    Ok(MetricScore {
        value,
        evidence: GeoEvidence {
            maps: per_view.into_iter().map(|v| v.0).collect(),
            inliers,
            valid,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn field(normals: &[Vec3]) -> NormalMap {
        let mut m = NormalMap::invalid(normals.len() as u32, 1);
        for (i, n) in normals.iter().enumerate() {
            m.set(i, n);
        }
        m
    }

    /// Rotates `n` by `deg` about an axis perpendicular to it.
    fn tilt(n: &Vec3, deg: f64) -> Vec3 {
        let helper = if n.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let axis = Unit::new_normalize(n.cross(&helper));
        Rotation3::from_axis_angle(&axis, deg.to_radians()) * n
    }

    fn sample_normals(k: usize) -> Vec<Vec3> {
        (0..k)
            .map(|i| {
                let t = i as f64 * 0.37;
                Vec3::new(t.sin() * 0.5, t.cos() * 0.3, 1.0).normalize()
            })
            .collect()
    }

    fn score(a: &[Vec3], p: &[Vec3], cfg: &GeoConfig) -> f64 {
        let mask = vec![true; a.len()];
        geometric_consistency(&[field(a)], &[field(p)], &[mask], cfg)
            .unwrap()
            .value
    }

    #[test]
    fn identical_fields_score_full() {
        let n = sample_normals(50);
        assert_eq!(score(&n, &n, &GeoConfig::default()), 100.0);
    }

    #[test]
    fn uniform_40_degree_error_scores_zero() {
        let n = sample_normals(50);
        let p: Vec<Vec3> = n.iter().map(|n| tilt(n, 40.0)).collect();
        assert_eq!(score(&n, &p, &GeoConfig::default()), 0.0);
    }

    #[test]
    fn half_10_half_40_scores_half() {
        let n = sample_normals(40);
        let p: Vec<Vec3> = n
            .iter()
            .enumerate()
            .map(|(i, n)| tilt(n, if i % 2 == 0 { 10.0 } else { 40.0 }))
            .collect();
        assert_eq!(score(&n, &p, &GeoConfig::default()), 50.0);
    }

    #[test]
    fn no_valid_pixels_is_an_error() {
        let a = NormalMap::invalid(4, 4);
        let err = geometric_consistency(
            std::slice::from_ref(&a),
            std::slice::from_ref(&a),
            &[vec![true; 16]],
            &GeoConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "no valid pixels");
    }

    #[test]
    fn per_view_mean_differs_from_pooled() {
        let n = sample_normals(4);
        let good = field(&n);
        let small = field(&n[..1]);
        // view 0: 4 pixels all inliers; view 1: 1 pixel outlier
        let a = [good.clone(), small.clone()];
        let p = [good, field(&[tilt(&n[0], 40.0)])];
        let masks = [vec![true; 4], vec![true; 1]];
        let pooled = geometric_consistency(&a, &p, &masks, &GeoConfig::default()).unwrap();
        assert_eq!(pooled.value, 80.0);
        let cfg = GeoConfig {
            pooling: Pooling::PerViewMean,
            ..Default::default()
        };
        assert_eq!(
            geometric_consistency(&a, &p, &masks, &cfg).unwrap().value,
            50.0
        );
    }

    #[test]
    fn evidence_marks_invalid_pixels() {
        let n = sample_normals(3);
        let mut mask = vec![true; 3];
        mask[1] = false;
        let s = geometric_consistency(&[field(&n)], &[field(&n)], &[mask], &GeoConfig::default())
            .unwrap();
        assert_eq!(s.evidence.maps[0].data[1], -1.0);
        assert_eq!(s.evidence.valid, vec![2]);
    }

    proptest! {
        #[test]
        fn shared_rotation_preserves_score(
            angles in prop::collection::vec(0.0f64..80.0, 1..40),
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, rot in 0.0f64..3.0,
        ) {
            let n = sample_normals(angles.len());
            let p: Vec<Vec3> = n.iter().zip(&angles).map(|(n, &a)| tilt(n, a)).collect();
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(ax, ay, az)), rot);
            let rn: Vec<Vec3> = n.iter().map(|v| r * v).collect();
            let rp: Vec<Vec3> = p.iter().map(|v| r * v).collect();
            // keep clear of the threshold so f32 storage cannot flip an inlier
            prop_assume!(angles.iter().all(|a| (a - 23.0).abs() > 0.01));
            let cfg = GeoConfig::default();
            prop_assert_eq!(score(&n, &p, &cfg), score(&rn, &rp, &cfg));
        }

        #[test]
        fn shrinking_threshold_never_adds_inliers(
            angles in prop::collection::vec(0.0f64..80.0, 1..40),
            d1 in 1.0f64..89.0, d2 in 1.0f64..89.0,
        ) {
            let n = sample_normals(angles.len());
            let p: Vec<Vec3> = n.iter().zip(&angles).map(|(n, &a)| tilt(n, a)).collect();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let s_lo = score(&n, &p, &GeoConfig { delta_norm: lo, ..Default::default() });
            let s_hi = score(&n, &p, &GeoConfig { delta_norm: hi, ..Default::default() });
            prop_assert!(s_lo <= s_hi);
            prop_assert!((0.0..=100.0).contains(&s_lo));
        }
    }
}
