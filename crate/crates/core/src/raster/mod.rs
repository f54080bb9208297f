//! Software z-buffer rasterizer producing normal, depth, opacity and face-id
//! buffers, plus per-vertex visibility across a rig.
//!
//! Pixel ownership follows the top-left fill rule on pixel centers; at equal
//! depth the lower face index wins. There is no back-face culling, but the
//! stored normal is flipped whenever it faces away from the camera.

mod buffers;
pub mod export;
mod visibility;

use rayon::prelude::*;

use crate::assets::{face_normals, vertex_normals, TriMesh};
use crate::camrig::CameraView;
use crate::Vec3;

pub use buffers::{DepthMap, NormalMap, RenderBuffers, NO_FACE};
pub use visibility::{
    compute_visibility, depth_epsilon, vertex_visibility, view_visibility, VisibilityTable,
    LOOKUP_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shading {
    Flat,
    #[default]
    Smooth,
}

/// Face and vertex normals computed once and reused for every view.
pub struct ShadingNormals {
    faces: Vec<Vec3>,
    vertices: Vec<Option<Vec3>>,
}

impl ShadingNormals {
    pub fn of(mesh: &TriMesh) -> Self {
        let faces = mesh
            .face_normals
            .clone()
            .unwrap_or_else(|| face_normals(mesh));
        let vertices = mesh
            .vertex_normals
            .clone()
            .unwrap_or_else(|| vertex_normals(mesh));
        Self { faces, vertices }
    }
}

pub fn rasterize(mesh: &TriMesh, view: &CameraView, shading: Shading) -> RenderBuffers {
    rasterize_with(mesh, &ShadingNormals::of(mesh), view, shading)
}

/// Renders every view in parallel. Output order follows `views`.
pub fn render_views(mesh: &TriMesh, views: &[CameraView], shading: Shading) -> Vec<RenderBuffers> {
    let normals = ShadingNormals::of(mesh);
    views
        .par_iter()
        .map(|v| rasterize_with(mesh, &normals, v, shading))
        .collect()
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

#[inline]
fn is_top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

pub fn rasterize_with(
    mesh: &TriMesh,
    normals: &ShadingNormals,
    view: &CameraView,
    shading: Shading,
) -> RenderBuffers {
    let (w, h) = (view.width, view.height);
    let mut out = RenderBuffers::empty(w, h);
    let cam: Vec<Vec3> = mesh.vertices.iter().map(|p| view.to_camera(p)).collect();
    let k = view.intrinsics;
    let screen: Vec<(f64, f64)> = cam
        .iter()
        .map(|pc| {
            let d = -pc.z;
            (k.cx + k.fx * pc.x / d, k.cy - k.fy * pc.y / d)
        })
        .collect();
    let cam_vnormals: Vec<Option<Vec3>> = normals
        .vertices
        .iter()
        .map(|n| n.map(|n| view.rotation * n))
        .collect();

    for (fi, face) in mesh.faces.iter().enumerate() {
        let mut idx = [face[0] as usize, face[1] as usize, face[2] as usize];
        // triangles crossing the near plane are skipped rather than clipped
        if idx.iter().any(|&i| -cam[i].z <= view.near) {
            continue;
        }
        let mut area = edge(screen[idx[0]], screen[idx[1]], screen[idx[2]]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            idx.swap(1, 2);
            area = -area;
        }
        let s = idx.map(|i| screen[i]);
        let inv_d = idx.map(|i| 1.0 / -cam[i].z);

        let min_x = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0);
        let x1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let y0 = (min_y - 0.5).ceil().max(0.0);
        let y1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }

        let tl = [
            is_top_left(s[1], s[2]),
            is_top_left(s[2], s[0]),
            is_top_left(s[0], s[1]),
        ];
        let face_normal = view.rotation * normals.faces[fi];

        for py in y0 as u32..=y1 as u32 {
            let cy = py as f64 + 0.5;
            for px in x0 as u32..=x1 as u32 {
                let p = (px as f64 + 0.5, cy);
                let wts = [
                    edge(s[1], s[2], p),
                    edge(s[2], s[0], p),
                    edge(s[0], s[1], p),
                ];
                let inside = wts
                    .iter()
                    .zip(tl)
                    .all(|(&wt, top_left)| wt > 0.0 || (wt == 0.0 && top_left));
                if !inside {
                    continue;
                }
                let l = wts.map(|wt| wt / area);
                let inv_z = l[0] * inv_d[0] + l[1] * inv_d[1] + l[2] * inv_d[2];
                let depth = 1.0 / inv_z;
                if !(depth > view.near && depth < view.far) {
                    continue;
                }
                let pix = out.index(px, py);
                let current = out.depth.data[pix];
                if current > 0.0 && depth as f32 >= current {
                    continue;
                }

                let mut n = match shading {
                    Shading::Flat => face_normal,
                    Shading::Smooth => {
                        let mut acc = Vec3::zeros();
                        let mut ok = true;
                        for c in 0..3 {
                            match cam_vnormals[idx[c]] {
                                Some(vn) => acc += vn * (l[c] * inv_d[c] / inv_z),
                                None => ok = false,
                            }
                        }
                        let len = acc.norm();
                        if ok && len > 1e-9 {
                            acc / len
                        } else {
                            face_normal
                        }
                    }
                };
                let pc = view.unproject_camera(p.0, p.1, depth);
                if n.dot(&pc) > 0.0 {
                    n = -n;
                }
                out.depth.data[pix] = depth as f32;
                out.normals.set(pix, &n);
                out.face_id[pix] = fi as u32;
            }
        }
    }
    out
}
