//! Resolving the affine ambiguity of relative depth, and converting metric
//! depth to camera-space normals.

use super::{MetricError, Result};
use crate::backends::DepthConvention;
use crate::camrig::CameraView;
use crate::raster::{DepthMap, NormalMap};
use crate::Vec3;

pub const MIN_ALIGN_PIXELS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDepth {
    pub scale: f64,
    pub shift: f64,
    /// Whether the fit was made against `1 / pred`.
    pub reciprocal: bool,
    pub depth: DepthMap,
}

fn fit(pred: &[f64], reference: &DepthMap, mask: &[bool]) -> Result<(f64, f64)> {
    let pairs = || {
        (0..pred.len()).filter_map(|i| {
            (mask[i] && pred[i].is_finite())
                .then(|| reference.at(i).map(|r| (pred[i], r)))
                .flatten()
        })
    };
    let n = pairs().count();
    if n < MIN_ALIGN_PIXELS {
        return Err(MetricError::TooFewPixels {
            got: n,
            need: MIN_ALIGN_PIXELS,
        });
    }
    let (sp, sr) = pairs().fold((0.0, 0.0), |(a, b), (p, r)| (a + p, b + r));
    let (mp, mr) = (sp / n as f64, sr / n as f64);
    let (cov, var) = pairs().fold((0.0, 0.0), |(c, v), (p, r)| {
        (c + (p - mp) * (r - mr), v + (p - mp) * (p - mp))
    });
    if (var / n as f64).sqrt() <= 1e-12 * mp.abs().max(1.0) {
        return Err(MetricError::ConstantDepth);
    }
    let s = cov / var;
    if s <= 0.0 {
        return Err(MetricError::InvertedDepth(s));
    }
    Ok((s, mr - s * mp))
}

fn apply(pred: &[f64], mask: &[bool], reference: &DepthMap, s: f64, b: f64) -> DepthMap {
    let mut out = DepthMap::invalid(reference.width, reference.height);
    for i in 0..pred.len() {
        if mask[i] && pred[i].is_finite() {
            let d = (s * pred[i] + b) as f32;
            if d > 0.0 && d.is_finite() {
                out.data[i] = d;
            }
        }
    }
    out
}

fn check_shapes(pred: &DepthMap, reference: &DepthMap, mask: &[bool]) -> Result<()> {
    if pred.data.len() != reference.data.len() || mask.len() != pred.data.len() {
        return Err(MetricError::Shape(format!(
            "prediction {}×{}, reference {}×{}, mask {}",
            pred.width,
            pred.height,
            reference.width,
            reference.height,
            mask.len()
        )));
    }
    Ok(())
}

/// Least-squares `s·pred + b ≈ reference` over masked pixels. `pred` values
/// only need to be finite; zeros and negatives are legal relative depths.
pub fn align_depth(pred: &DepthMap, reference: &DepthMap, mask: &[bool]) -> Result<AlignedDepth> {
    check_shapes(pred, reference, mask)?;
    let p: Vec<f64> = pred.data.iter().map(|&x| x as f64).collect();
    let (scale, shift) = fit(&p, reference, mask)?;
    Ok(AlignedDepth {
        scale,
        shift,
        reciprocal: false,
        depth: apply(&p, mask, reference, scale, shift),
    })
}

/// Aligns a backend prediction of either convention. Disparity is inverted
/// before fitting; a depth prediction whose fit comes out inverted is retried
/// as disparity.
pub fn align_depth_auto(
    pred: &DepthMap,
    convention: DepthConvention,
    reference: &DepthMap,
    mask: &[bool],
) -> Result<AlignedDepth> {
    check_shapes(pred, reference, mask)?;
    let direct: Vec<f64> = pred.data.iter().map(|&x| x as f64).collect();
    let reciprocal: Vec<f64> = direct
        .iter()
        .map(|&x| if x != 0.0 { 1.0 / x } else { f64::NAN })
        .collect();
    let attempt = |p: &[f64], recip: bool| {
        fit(p, reference, mask).map(|(scale, shift)| AlignedDepth {
            scale,
            shift,
            reciprocal: recip,
            depth: apply(p, mask, reference, scale, shift),
        })
    };
    match convention {
        DepthConvention::Disparity => attempt(&reciprocal, true),
        DepthConvention::Depth => match attempt(&direct, false) {
            Err(MetricError::InvertedDepth(_)) => attempt(&reciprocal, true),
            other => other,
        },
    }
}

/// Camera-space normals from metric depth by central differences. A pixel is
/// valid only if it and its four neighbors are masked and have valid depth.
pub fn depth_to_normal(depth: &DepthMap, view: &CameraView, mask: &[bool]) -> NormalMap {
    let (w, h) = (depth.width as usize, depth.height as usize);
    let mut out = NormalMap::invalid(depth.width, depth.height);
    if w < 3 || h < 3 {
        return out;
    }
    let point = |x: usize, y: usize| -> Option<Vec3> {
        let i = y * w + x;
        if !mask[i] {
            return None;
        }
        depth
            .at(i)
            .map(|d| view.unproject_camera(x as f64 + 0.5, y as f64 + 0.5, d))
    };
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let (Some(c), Some(l), Some(r), Some(t), Some(b)) = (
                point(x, y),
                point(x - 1, y),
                point(x + 1, y),
                point(x, y - 1),
                point(x, y + 1),
            ) else {
                continue;
            };
            let du = r - l;
            let dv = b - t;
            let mut n = dv.cross(&du);
            let len = n.norm();
            if !(len > 0.0 && len.is_finite()) {
                continue;
            }
            n /= len;
            if n.dot(&c) > 0.0 {
                n = -n;
            }
            out.set(y * w + x, &n);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camrig::RigSpec;

    fn view(res: u32) -> CameraView {
        let spec = RigSpec {
            resolution: res,
            ..Default::default()
        };
        CameraView::from_spec(0, 0.0, 0.0, &spec).unwrap()
    }

    /// Depth of the plane through `(0, 0, -d0)` with camera-space normal `n`.
    fn plane_depth(view: &CameraView, n: Vec3, d0: f64) -> DepthMap {
        let mut m = DepthMap::invalid(view.width, view.height);
        let p0 = Vec3::new(0.0, 0.0, -d0);
        for y in 0..view.height {
            for x in 0..view.width {
                let ray = view.unproject_camera(x as f64 + 0.5, y as f64 + 0.5, 1.0);
                let t = n.dot(&p0) / n.dot(&ray);
                m.data[(y * view.width + x) as usize] = t as f32;
            }
        }
        m
    }

    fn ramp(w: u32, h: u32) -> DepthMap {
        DepthMap {
            width: w,
            height: h,
            data: (0..w * h).map(|i| 2.0 + (i % 97) as f32 * 0.01).collect(),
        }
    }

    #[test]
    fn affine_corruption_is_undone() {
        let r = ramp(32, 32);
        let pred = DepthMap {
            data: r.data.iter().map(|&d| 2.0 * d + 3.0).collect(),
            ..r.clone()
        };
        let mask = vec![true; r.data.len()];
        let a = align_depth(&pred, &r, &mask).unwrap();
        assert!((a.scale - 0.5).abs() < 1e-6, "{}", a.scale);
        assert!((a.shift + 1.5).abs() < 1e-6, "{}", a.shift);
        for (x, y) in a.depth.data.iter().zip(&r.data) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn identity_prediction_fits_unit_scale() {
        let r = ramp(16, 16);
        let a = align_depth(&r, &r, &vec![true; 256]).unwrap();
        assert!((a.scale - 1.0).abs() < 1e-9 && a.shift.abs() < 1e-9);
    }

    #[test]
    fn negated_depth_is_rejected() {
        let r = ramp(16, 16);
        let pred = DepthMap {
            data: r.data.iter().map(|d| -d).collect(),
            ..r.clone()
        };
        let err = align_depth(&pred, &r, &vec![true; 256]).unwrap_err();
        assert!(matches!(err, MetricError::InvertedDepth(_)));
        assert!(err.to_string().contains("inverted depth"));
    }

    #[test]
    fn disparity_is_recovered_by_reciprocal_retry() {
        let r = ramp(16, 16);
        // 1/pred = 0.25·ref + 0.1
        let pred = DepthMap {
            data: r.data.iter().map(|&d| 1.0 / (0.25 * d + 0.1)).collect(),
            ..r.clone()
        };
        let mask = vec![true; 256];
        assert!(matches!(
            align_depth(&pred, &r, &mask),
            Err(MetricError::InvertedDepth(_))
        ));
        let a = align_depth_auto(&pred, DepthConvention::Depth, &r, &mask).unwrap();
        assert!(a.reciprocal);
        assert!((a.scale - 4.0).abs() < 1e-4 && (a.shift + 0.4).abs() < 1e-4);
        let b = align_depth_auto(&pred, DepthConvention::Disparity, &r, &mask).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_mask_is_an_error() {
        let r = ramp(16, 16);
        let mut mask = vec![false; 256];
        mask[..99].fill(true);
        assert!(matches!(
            align_depth(&r, &r, &mask),
            Err(MetricError::TooFewPixels { got: 99, need: 100 })
        ));
    }

    #[test]
    fn fronto_parallel_plane_faces_camera() {
        let v = view(64);
        let d = plane_depth(&v, Vec3::z(), 4.2);
        let n = depth_to_normal(&d, &v, &vec![true; 64 * 64]);
        let mut count = 0;
        for i in 0..n.len() {
            if let Some(n) = n.at(i) {
                assert!((n - Vec3::z()).norm() < 1e-4, "{n:?}");
                count += 1;
            }
        }
        assert_eq!(count, 62 * 62);
    }

    #[test]
    fn tilted_plane_normal_is_recovered() {
        let v = view(64);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let truth = Vec3::new(-s, 0.0, s);
        let d = plane_depth(&v, truth, 4.2);
        let n = depth_to_normal(&d, &v, &vec![true; 64 * 64]);
        for i in 0..n.len() {
            if let Some(n) = n.at(i) {
                let ang = n.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees();
                assert!(ang < 1.0, "{ang}");
            }
        }
    }

    #[test]
    fn masked_neighbors_invalidate() {
        let v = view(16);
        let d = plane_depth(&v, Vec3::z(), 4.2);
        let mut mask = vec![true; 256];
        mask[5 * 16 + 5] = false;
        let n = depth_to_normal(&d, &v, &mask);
        for (x, y) in [(5, 5), (4, 5), (6, 5), (5, 4), (5, 6)] {
            assert!(!n.is_valid(y * 16 + x));
        }
        assert!(n.is_valid(7 * 16 + 7));
    }
}
