//! Independent oracles shared by the integration suites.

#![allow(dead_code)]

use eval3d::camrig::CameraView;
use eval3d::raster::RenderBuffers;
use eval3d::Vec3;

/// Viewing depth of the ray through pixel `(x, y)` to the unit sphere at the
/// origin, if it hits.
pub fn sphere_depth(view: &CameraView, x: u32, y: u32) -> Option<f64> {
    let c = view.center();
    // a point at viewing depth 1 makes the ray parameter equal the depth
    let dir = view.unproject(x as f64 + 0.5, y as f64 + 0.5, 1.0) - c;
    let a = dir.norm_squared();
    let b = c.dot(&dir);
    let disc = b * b - a * (c.norm_squared() - 1.0);
    (disc >= 0.0).then(|| (-b - disc.sqrt()) / a)
}

/// Median absolute difference between rendered and ray-cast sphere depth
/// over pixels both consider covered.
pub fn sphere_depth_median_error(view: &CameraView, b: &RenderBuffers) -> f64 {
    let mut errs = Vec::new();
    for y in 0..b.height {
        for x in 0..b.width {
            let i = b.index(x, y);
            if let (Some(d), Some(t)) = (b.depth.at(i), sphere_depth(view, x, y)) {
                errs.push((d - t).abs());
            }
        }
    }
    errs.sort_by(f64::total_cmp);
    errs[errs.len() / 2]
}

/// Exact pixel area of the perspective image of a sphere of radius `r`
/// centered on the optical axis at distance `d`.
pub fn sphere_disk_area(view: &CameraView, r: f64, d: f64) -> f64 {
    let f = view.intrinsics.fy;
    let radius = f * r / (d * d - r * r).sqrt();
    std::f64::consts::PI * radius * radius
}

/// Weak-perspective approximation `π (f r / d)²`.
pub fn sphere_disk_area_weak(view: &CameraView, r: f64, d: f64) -> f64 {
    let f = view.intrinsics.fy;
    std::f64::consts::PI * (f * r / d).powi(2)
}

/// Brute-force ray cast: is `p` unobstructed from the camera of `view`
/// (ignoring triangles incident to the point itself)?
pub fn ray_visible(mesh: &eval3d::assets::TriMesh, view: &CameraView, vertex: usize) -> bool {
    let p = mesh.vertices[vertex];
    let c = view.center();
    let dir = p - c;
    let len = dir.norm();
    let dir = dir / len;
    let proj = view.project(&p);
    if !proj.in_frustum {
        return false;
    }
    for (fi, face) in mesh.faces.iter().enumerate() {
        if face.contains(&(vertex as u32)) {
            continue;
        }
        let [a, b, cc] = mesh.corners(fi);
        if let Some(t) = ray_triangle(&c, &dir, &a, &b, &cc) {
            if t < len - 1e-6 {
                return false;
            }
        }
    }
    true
}

fn ray_triangle(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}
