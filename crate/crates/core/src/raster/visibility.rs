use rayon::prelude::*;

use super::{rasterize_with, RenderBuffers, Shading, ShadingNormals, NO_FACE};
use crate::assets::TriMesh;
use crate::camrig::CameraView;

/// Depth slack when comparing a vertex against the z-buffer.
pub fn depth_epsilon(depth: f64) -> f64 {
    (1e-3 * depth).max(1e-3)
}

/// Which vertices are seen by which views.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityTable {
    pub n_vertices: usize,
    pub n_views: usize,
    /// Vertex-major flags: `flags[v * n_views + k]`.
    flags: Vec<bool>,
    counts: Vec<u32>,
}

impl VisibilityTable {
    /// Assembles the table from one flag vector per view (in view order).
    pub fn from_view_flags(n_vertices: usize, per_view: &[Vec<bool>]) -> Self {
        let n_views = per_view.len();
        let mut flags = vec![false; n_vertices * n_views];
        let mut counts = vec![0u32; n_vertices];
        for (k, view_flags) in per_view.iter().enumerate() {
            assert_eq!(view_flags.len(), n_vertices);
            for (v, &seen) in view_flags.iter().enumerate() {
                if seen {
                    flags[v * n_views + k] = true;
                    counts[v] += 1;
                }
            }
        }
        Self {
            n_vertices,
            n_views,
            flags,
            counts,
        }
    }

    pub fn is_visible(&self, vertex: usize, view: usize) -> bool {
        self.flags[vertex * self.n_views + view]
    }

    pub fn count(&self, vertex: usize) -> u32 {
        self.counts[vertex]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Views (as indices into the rig) that see `vertex`.
    pub fn views_of(&self, vertex: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.flags[vertex * self.n_views..(vertex + 1) * self.n_views];
        row.iter().enumerate().filter(|(_, &f)| f).map(|(k, _)| k)
    }

    pub fn view_flags(&self, view: usize) -> Vec<bool> {
        (0..self.n_vertices)
            .map(|v| self.is_visible(v, view))
            .collect()
    }
}

/// Chebyshev radius of the window searched for a vertex's own faces.
pub const LOOKUP_RADIUS: i64 = 2;

/// Per-vertex visibility in a single rendered view.
///
/// A vertex in the frustum is visible when its own pixel passes the depth
/// test, or when a pixel within [`LOOKUP_RADIUS`] shows one of the faces
/// incident to it. The second rule catches mesh corners, which sit exactly on
/// coverage boundaries where the containing pixel's center often misses the
/// surface.
pub fn view_visibility(mesh: &TriMesh, view: &CameraView, buffers: &RenderBuffers) -> Vec<bool> {
    let (w, h) = (buffers.width as i64, buffers.height as i64);
    mesh.vertices
        .iter()
        .enumerate()
        .map(|(vi, p)| {
            let pr = view.project(p);
            if !pr.in_frustum {
                return false;
            }
            let (px, py) = (pr.u.floor() as i64, pr.v.floor() as i64);
            if let Some(z) = buffers.depth.at(buffers.index(px as u32, py as u32)) {
                if pr.depth <= z + depth_epsilon(pr.depth) {
                    return true;
                }
            }
            for y in (py - LOOKUP_RADIUS).max(0)..=(py + LOOKUP_RADIUS).min(h - 1) {
                for x in (px - LOOKUP_RADIUS).max(0)..=(px + LOOKUP_RADIUS).min(w - 1) {
                    let f = buffers.face_id[buffers.index(x as u32, y as u32)];
                    if f != NO_FACE && mesh.faces[f as usize].contains(&(vi as u32)) {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

pub fn vertex_visibility(
    mesh: &TriMesh,
    rig: &[CameraView],
    buffers: &[RenderBuffers],
) -> VisibilityTable {
    assert_eq!(rig.len(), buffers.len(), "one buffer set per view");
    let per_view: Vec<Vec<bool>> = rig
        .par_iter()
        .zip(buffers.par_iter())
        .map(|(view, b)| view_visibility(mesh, view, b))
        .collect();
    VisibilityTable::from_view_flags(mesh.vertex_count(), &per_view)
}

/// Renders each view and reduces it to visibility flags immediately, so
/// only a handful of buffers are alive at once.
pub fn compute_visibility(mesh: &TriMesh, rig: &[CameraView]) -> VisibilityTable {
    let normals = ShadingNormals::of(mesh);
    let per_view: Vec<Vec<bool>> = rig
        .par_iter()
        .map(|view| {
            let b = rasterize_with(mesh, &normals, view, Shading::Flat);
            view_visibility(mesh, view, &b)
        })
        .collect();
    VisibilityTable::from_view_flags(mesh.vertex_count(), &per_view)
}
