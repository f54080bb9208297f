//! Turntable camera rigs and the pinhole projection.
//!
//! Conventions: world up is +y, right-handed, cameras look down their local
//! −z axis. Azimuth 0 at elevation 0 places the camera on +z looking at the
//! origin; azimuth grows counter-clockwise seen from above (towards +x).
//! Image coordinates have u to the right and v downward, with pixel `(i, j)`
//! covering `[i, i+1) × [j, j+1)`.

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum RigError {
    #[error("degenerate up vector (elevation {0}°)")]
    DegenerateUp(f64),
    #[error("invalid rig spec: {0}")]
    InvalidSpec(String),
    #[error("{n} does not divide rig size {size}")]
    NotADivisor { n: usize, size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Parameters of an evenly spaced turntable rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigSpec {
    pub n_views: usize,
    pub elevation: f64,
    pub distance: f64,
    pub vfov: f64,
    pub resolution: u32,
    pub near: f64,
    pub far: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self {
            n_views: 120,
            elevation: 15.0,
            distance: 4.2,
            vfov: 50.0,
            resolution: 512,
            near: 0.1,
            far: 10.0,
        }
    }
}

impl RigSpec {
    pub fn validate(&self) -> Result<(), RigError> {
        let bad = |m: &str| Err(RigError::InvalidSpec(m.to_string()));
        if self.n_views == 0 {
            return bad("n_views must be at least 1");
        }
        if self.resolution == 0 {
            return bad("resolution must be positive");
        }
        if !(self.vfov > 0.0 && self.vfov < 180.0) {
            return bad("vfov must lie in (0, 180)");
        }
        if !(self.distance > 0.0) {
            return bad("distance must be positive");
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return bad("need 0 < near < far");
        }
        Ok(())
    }
}

/// One pinhole camera looking at the world origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub id: u32,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub intrinsics: Intrinsics,
}

/// Result of projecting a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Distance along the viewing axis; positive in front of the camera.
    pub depth: f64,
    pub in_frustum: bool,
}

impl CameraView {
    /// Camera placed on a sphere of radius `distance` around the origin.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at_origin(
        id: u32,
        azimuth: f64,
        elevation: f64,
        distance: f64,
        vfov: f64,
        width: u32,
        height: u32,
        near: f64,
        far: f64,
    ) -> Result<Self, RigError> {
        let (az, el) = (azimuth.to_radians(), elevation.to_radians());
        let center = Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos()) * distance;
        let forward = -center / distance;
        let side = forward.cross(&Vec3::y());
        if side.norm() < 1e-9 {
            return Err(RigError::DegenerateUp(elevation));
        }
        let right = side.normalize();
        let up = right.cross(&forward);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), up.transpose(), (-forward).transpose()]);
        let translation = -(rotation * center);
        let focal = (height as f64 / 2.0) / (vfov.to_radians() / 2.0).tan();
        Ok(Self {
            id,
            azimuth,
            elevation,
            distance,
            vfov,
            width,
            height,
            near,
            far,
            rotation,
            translation,
            intrinsics: Intrinsics {
                fx: focal,
                fy: focal,
                cx: width as f64 / 2.0,
                cy: height as f64 / 2.0,
            },
        })
    }

    /// Camera of `spec` at an arbitrary azimuth and elevation.
    pub fn from_spec(
        id: u32,
        azimuth: f64,
        elevation: f64,
        spec: &RigSpec,
    ) -> Result<Self, RigError> {
        Self::look_at_origin(
            id,
            azimuth,
            elevation,
            spec.distance,
            spec.vfov,
            spec.resolution,
            spec.resolution,
            spec.near,
            spec.far,
        )
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Unit viewing direction in world space.
    pub fn view_dir(&self) -> Vec3 {
        -self.rotation.row(2).transpose()
    }

    pub fn world_to_camera(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn project(&self, p: &Vec3) -> Projection {
        self.project_camera(&self.to_camera(p))
    }

    /// Projects a point already in camera space.
    pub fn project_camera(&self, pc: &Vec3) -> Projection {
        let depth = -pc.z;
        let k = &self.intrinsics;
        let u = k.cx + k.fx * pc.x / depth;
        let v = k.cy - k.fy * pc.y / depth;
        let in_frustum = depth > self.near
            && depth < self.far
            && u >= 0.0
            && u < self.width as f64
            && v >= 0.0
            && v < self.height as f64;
        Projection {
            u,
            v,
            depth,
            in_frustum,
        }
    }

    /// Camera-space point at image position `(u, v)` and viewing depth.
    pub fn unproject_camera(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new(
            (u - k.cx) * depth / k.fx,
            -(v - k.cy) * depth / k.fy,
            -depth,
        )
    }

    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let pc = self.unproject_camera(u, v, depth);
        self.rotation.transpose() * (pc - self.translation)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Builds `spec.n_views` cameras with azimuths `i * 360 / n_views`.
pub fn build_rig(spec: &RigSpec) -> Result<Vec<CameraView>, RigError> {
    spec.validate()?;
    (0..spec.n_views)
        .map(|i| {
            let az = i as f64 * 360.0 / spec.n_views as f64;
            CameraView::from_spec(i as u32, az, spec.elevation, spec)
        })
        .collect()
}

/// Every `(len / n)`-th view starting from the first.
pub fn subsample_rig(rig: &[CameraView], n: usize) -> Result<Vec<CameraView>, RigError> {
    if n == 0 || rig.is_empty() || !rig.len().is_multiple_of(n) {
        return Err(RigError::NotADivisor { n, size: rig.len() });
    }
    let step = rig.len() / n;
    Ok(rig.iter().step_by(step).cloned().collect())
}

/// Pose change from `from` to `to` as (Δazimuth, Δelevation, Δradius),
/// with Δazimuth wrapped to (−180, 180].
pub fn relative_pose(from: &CameraView, to: &CameraView) -> (f64, f64, f64) {
    let mut daz = (to.azimuth - from.azimuth) % 360.0;
    if daz > 180.0 {
        daz -= 360.0;
    } else if daz <= -180.0 {
        daz += 360.0;
    }
    (
        daz,
        to.elevation - from.elevation,
        to.distance - from.distance,
    )
}

/// Serialized form of a camera, shared by the rig sidecar file and the
/// backend job protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub id: u32,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    pub intrinsics: Intrinsics,
    /// 4×4 rigid transform, row-major.
    pub world_to_camera: Vec<f64>,
}

impl From<&CameraView> for CameraRecord {
    fn from(c: &CameraView) -> Self {
        let m = c.world_to_camera();
        Self {
            id: c.id,
            azimuth: c.azimuth,
            elevation: c.elevation,
            distance: c.distance,
            vfov: c.vfov,
            width: c.width,
            height: c.height,
            near: c.near,
            far: c.far,
            intrinsics: c.intrinsics,
            world_to_camera: (0..4)
                .flat_map(|r| (0..4).map(move |col| (r, col)))
                .map(|(r, col)| m[(r, col)])
                .collect(),
        }
    }
}

impl CameraRecord {
    /// Rebuilds the camera from its pose parameters.
    pub fn to_view(&self) -> Result<CameraView, RigError> {
        CameraView::look_at_origin(
            self.id,
            self.azimuth,
            self.elevation,
            self.distance,
            self.vfov,
            self.width,
            self.height,
            self.near,
            self.far,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    pub views: Vec<CameraRecord>,
}

impl RigFile {
    pub fn from_rig(rig: &[CameraView]) -> Self {
        Self {
            views: rig.iter().map(CameraRecord::from).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_rig_steps_three_degrees() {
        let rig = build_rig(&RigSpec::default()).unwrap();
        assert_eq!(rig.len(), 120);
        for (i, c) in rig.iter().enumerate() {
            assert_eq!(c.azimuth, i as f64 * 3.0);
        }
    }

    #[test]
    fn twelve_view_rig() {
        let rig = build_rig(&RigSpec {
            n_views: 12,
            ..Default::default()
        })
        .unwrap();
        let az: Vec<f64> = rig.iter().map(|c| c.azimuth).collect();
        assert_eq!(az, (0..12).map(|i| i as f64 * 30.0).collect::<Vec<_>>());
    }

    #[test]
    fn straight_down_is_degenerate() {
        let err = build_rig(&RigSpec {
            elevation: 90.0,
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("degenerate up vector"));
    }

    #[test]
    fn camera_invariants() {
        let spec = RigSpec::default();
        for c in build_rig(&spec).unwrap() {
            assert!((c.center().norm() - spec.distance).abs() < 1e-9);
            let rrt = c.rotation * c.rotation.transpose();
            assert!((rrt - Matrix3::identity()).norm() < 1e-9);
            let k = c.intrinsics;
            assert!((k.fx - 256.0 / 25f64.to_radians().tan()).abs() < 1e-9);
            assert_eq!((k.cx, k.cy), (256.0, 256.0));
        }
    }

    #[test]
    fn origin_projects_to_principal_point() {
        let c = CameraView::from_spec(0, 37.0, 15.0, &RigSpec::default()).unwrap();
        let p = c.project(&Vec3::zeros());
        assert!((p.u - 256.0).abs() < 1e-9 && (p.v - 256.0).abs() < 1e-9);
        assert!((p.depth - 4.2).abs() < 1e-9);
        assert!(p.in_frustum);
    }

    #[test]
    fn point_behind_camera() {
        let c = CameraView::from_spec(0, 0.0, 0.0, &RigSpec::default()).unwrap();
        let p = c.project(&Vec3::new(0.0, 0.0, 6.0));
        assert!(p.depth < 0.0);
        assert!(!p.in_frustum);
    }

    #[test]
    fn vertical_offset_hand_arithmetic() {
        let c = CameraView::from_spec(0, 0.0, 0.0, &RigSpec::default()).unwrap();
        let p = c.project(&Vec3::new(0.0, 0.5, 0.0));
        let fx = 256.0 / 25f64.to_radians().tan();
        let expected = 0.5 * fx / 4.2;
        assert!((256.0 - p.v - expected).abs() < 1e-9);
        assert!((expected - 65.35).abs() < 0.05);
        assert!((p.u - 256.0).abs() < 1e-9);
    }

    #[test]
    fn subsample_every_tenth() {
        let rig = build_rig(&RigSpec::default()).unwrap();
        let sub = subsample_rig(&rig, 12).unwrap();
        assert_eq!(sub.len(), 12);
        for (i, c) in sub.iter().enumerate() {
            assert_eq!(c.azimuth, i as f64 * 30.0);
        }
        let quarter: Vec<f64> = subsample_rig(&rig, 4)
            .unwrap()
            .iter()
            .map(|c| c.azimuth)
            .collect();
        assert_eq!(quarter, vec![0.0, 90.0, 180.0, 270.0]);
        assert_eq!(
            subsample_rig(&rig, 7).unwrap_err(),
            RigError::NotADivisor { n: 7, size: 120 }
        );
    }

    #[test]
    fn rig_rotation_permutes_centers() {
        let spec = RigSpec {
            n_views: 8,
            ..Default::default()
        };
        let rig = build_rig(&spec).unwrap();
        let step = 360.0 / 8.0;
        for (i, c) in rig.iter().enumerate() {
            let rotated =
                CameraView::from_spec(0, c.azimuth + step, spec.elevation, &spec).unwrap();
            let next = &rig[(i + 1) % rig.len()];
            assert!((rotated.center() - next.center()).norm() < 1e-9);
        }
    }

    #[test]
    fn record_round_trip() {
        let c = CameraView::from_spec(3, 45.0, 15.0, &RigSpec::default()).unwrap();
        let rec = CameraRecord::from(&c);
        assert_eq!(rec.world_to_camera.len(), 16);
        assert_eq!(rec.world_to_camera[15], 1.0);
        let json = serde_json::to_string(&rec).unwrap();
        let back: CameraRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_view().unwrap(), c);
    }

    proptest! {
        #[test]
        fn center_ray_hits_principal_point(az in 0.0f64..360.0, el in -80.0f64..80.0, t in 0.01f64..20.0) {
            let c = CameraView::from_spec(0, az, el, &RigSpec::default()).unwrap();
            let p = c.project(&(c.center() + c.view_dir() * t));
            prop_assert!((p.u - c.intrinsics.cx).abs() < 1e-6);
            prop_assert!((p.v - c.intrinsics.cy).abs() < 1e-6);
        }

        #[test]
        fn unproject_inverts_project(az in 0.0f64..360.0, el in -60.0f64..60.0,
                                     x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let c = CameraView::from_spec(0, az, el, &RigSpec::default()).unwrap();
            let p = Vec3::new(x, y, z);
            let pr = c.project(&p);
            prop_assert!(pr.in_frustum);
            let back = c.unproject(pr.u, pr.v, pr.depth);
            prop_assert!((back - p).norm() <= 1e-6 * p.norm().max(1.0));
        }
    }
}
