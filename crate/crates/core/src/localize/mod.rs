//! Mapping per-pixel and per-vertex inconsistency back onto the mesh, and
//! exporting it as a colored mesh.

mod jet;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use jet::JET;

use crate::assets::{write_ply_colored, TriMesh};
use crate::camrig::CameraView;
use crate::metrics::AngularMap;
use crate::raster::{VisibilityTable, LOOKUP_RADIUS};

pub const NO_DATA_COLOR: [u8; 3] = [128, 128, 128];

#[derive(Debug, thiserror::Error)]
pub enum LocalizeError {
    #[error("heat range lo {lo} must be below hi {hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("non-finite heat at vertex {0}")]
    NonFinite(usize),
    #[error("expected {expected} heat values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("{views} views but {maps} evidence maps")]
    Views { views: usize, maps: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-vertex heat; `None` marks vertices without enough observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexHeat {
    pub mean: Vec<Option<f64>>,
    pub max: Vec<Option<f64>>,
}

impl VertexHeat {
    /// Heat carrying a single value per vertex in both variants.
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        Self {
            mean: values.clone(),
            max: values,
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Cosine distance at `(u, v)`, bilinear over the valid taps. Falls back to
/// the nearest valid pixel within [`LOOKUP_RADIUS`] when no tap is valid.
fn sample_cosine(map: &AngularMap, u: f64, v: f64) -> Option<f64> {
    let (w, h) = (map.width as i64, map.height as i64);
    let at = |x: i64, y: i64| -> Option<f64> {
        if x < 0 || y < 0 || x >= w || y >= h {
            return None;
        }
        map.cosine_distance((y * w + x) as usize)
    };
    let (fx, fy) = (u - 0.5, v - 0.5);
    let (x0, y0) = (fx.floor() as i64, fy.floor() as i64);
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for (dx, dy, wt) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        if wt <= 0.0 {
            continue;
        }
        if let Some(d) = at(x0 + dx, y0 + dy) {
            acc += wt * d;
            wsum += wt;
        }
    }
    if wsum > 0.0 {
        return Some(acc / wsum);
    }
    let (px, py) = (u.floor() as i64, v.floor() as i64);
    let mut best: Option<(f64, f64)> = None;
    for dy in -LOOKUP_RADIUS..=LOOKUP_RADIUS {
        for dx in -LOOKUP_RADIUS..=LOOKUP_RADIUS {
            let (x, y) = (px + dx, py + dy);
            if let Some(d) = at(x, y) {
                let d2 = (x as f64 + 0.5 - u).powi(2) + (y as f64 + 0.5 - v).powi(2);
                if best.is_none_or(|(bd, _)| d2 < bd) {
                    best = Some((d2, d));
                }
            }
        }
    }
    best.map(|(_, d)| d)
}

/// Streaming form of [`backproject_geo`]: views are folded in one at a time.
#[derive(Debug, Clone)]
pub struct GeoHeatAccumulator {
    sum: Vec<f64>,
    max: Vec<f64>,
    count: Vec<u32>,
}

impl GeoHeatAccumulator {
    pub fn new(n_vertices: usize) -> Self {
        Self {
            sum: vec![0.0; n_vertices],
            max: vec![f64::NEG_INFINITY; n_vertices],
            count: vec![0; n_vertices],
        }
    }

    /// Cosine distance samples of one view for the vertices flagged visible.
    pub fn samples(
        mesh: &TriMesh,
        view: &CameraView,
        map: &AngularMap,
        visible: &[bool],
    ) -> Vec<Option<f64>> {
        mesh.vertices
            .iter()
            .zip(visible)
            .map(|(p, &seen)| {
                if !seen {
                    return None;
                }
                let pr = view.project(p);
                sample_cosine(map, pr.u, pr.v)
            })
            .collect()
    }

    pub fn add_samples(&mut self, samples: &[Option<f64>]) {
        for (vi, s) in samples.iter().enumerate() {
            if let Some(d) = *s {
                self.sum[vi] += d;
                self.max[vi] = self.max[vi].max(d);
                self.count[vi] += 1;
            }
        }
    }

    pub fn finish(&self, min_visibility: u32) -> VertexHeat {
        let keep = |vi: usize| self.count[vi] > 0 && self.count[vi] >= min_visibility;
        VertexHeat {
            mean: (0..self.sum.len())
                .map(|vi| keep(vi).then(|| self.sum[vi] / self.count[vi] as f64))
                .collect(),
            max: (0..self.sum.len())
                .map(|vi| keep(vi).then(|| self.max[vi]))
                .collect(),
        }
    }
}

/// Back-projects per-view cosine distance (`1 − n_anal · n_pred`) onto the
/// vertices visible in each view, aggregating mean and max across views.
pub fn backproject_geo(
    mesh: &TriMesh,
    views: &[CameraView],
    maps: &[AngularMap],
    vis: &VisibilityTable,
    min_visibility: u32,
) -> Result<VertexHeat, LocalizeError> {
    if views.len() != maps.len() || vis.n_views != views.len() {
        return Err(LocalizeError::Views {
            views: views.len(),
            maps: maps.len(),
        });
    }
    let mut acc = GeoHeatAccumulator::new(mesh.vertex_count());
    for (k, (view, map)) in views.iter().zip(maps).enumerate() {
        acc.add_samples(&GeoHeatAccumulator::samples(
            mesh,
            view,
            map,
            &vis.view_flags(k),
        ));
    }
    Ok(acc.finish(min_visibility))
}

/// Vertices whose variance strictly exceeds `delta`. No-data vertices are
/// never outliers.
pub fn semantic_outliers(variances: &[Option<f64>], delta: f64) -> Vec<bool> {
    variances
        .iter()
        .map(|v| v.is_some_and(|v| v > delta))
        .collect()
}

/// Jet color of `h` under the range `[lo, hi]`.
pub fn jet_color(h: f64, lo: f64, hi: f64) -> [u8; 3] {
    let t = ((h - lo) / (hi - lo)).clamp(0.0, 1.0);
    JET[(t * 255.0).round() as usize]
}

pub fn heat_colors(heat: &[Option<f64>], lo: f64, hi: f64) -> Result<Vec<[u8; 3]>, LocalizeError> {
    if !(lo < hi) {
        return Err(LocalizeError::BadRange { lo, hi });
    }
    heat.iter()
        .enumerate()
        .map(|(i, h)| match h {
            None => Ok(NO_DATA_COLOR),
            Some(h) if !h.is_finite() => Err(LocalizeError::NonFinite(i)),
            Some(h) => Ok(jet_color(*h, lo, hi)),
        })
        .collect()
}

/// Writes the mesh as binary PLY with per-vertex jet colors.
pub fn export_heatmap_mesh(
    mesh: &TriMesh,
    heat: &[Option<f64>],
    range: (f64, f64),
    path: impl AsRef<Path>,
) -> Result<(), LocalizeError> {
    if heat.len() != mesh.vertex_count() {
        return Err(LocalizeError::Length {
            expected: mesh.vertex_count(),
            got: heat.len(),
        });
    }
    let colors = heat_colors(heat, range.0, range.1)?;
    write_ply_colored(mesh, &colors, path)?;
    Ok(())
}

/// Default geometric heat range: up to four times the cosine distance at
/// the inlier threshold.
pub fn geo_heat_range(delta_norm_deg: f64) -> (f64, f64) {
    (0.0, 4.0 * (1.0 - delta_norm_deg.to_radians().cos()))
}

/// Default semantic heat range: up to twice the variance threshold.
pub fn sem_heat_range(delta: f64) -> (f64, f64) {
    (0.0, 2.0 * delta)
}
