//! Triangle meshes: loading, validation, normalization and analytic normals.

mod obj;
mod ply;
pub mod primitives;

use std::path::Path;

use thiserror::Error;

use crate::Vec3;

pub use ply::{write_ply_binary, write_ply_colored};

/// Faces whose area falls below this (after normalization) are dropped.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cannot read mesh file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed PLY: {0}")]
    Ply(String),
    #[error("empty mesh")]
    Empty,
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: u32,
        count: usize,
    },
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("all faces are degenerate")]
    AllDegenerate,
}

/// Indexed triangle mesh.
///
/// Immutable once built; the rasterizer and metric workers share it
/// read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Per-vertex unit normals; `None` entries mark vertices with no
    /// incident face.
    pub vertex_normals: Option<Vec<Option<Vec3>>>,
    pub face_normals: Option<Vec<Vec3>>,
}

impl TriMesh {
    /// Builds a mesh, checking index bounds and coordinate finiteness.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx,
                        count: vertices.len(),
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            faces,
            vertex_normals: None,
            face_normals: None,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn corners(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.corners(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Fills `face_normals` and `vertex_normals`.
    pub fn with_normals(mut self) -> Self {
        let fnormals = face_normals(&self);
        self.vertex_normals = Some(vertex_normals_from(&self, &fnormals));
        self.face_normals = Some(fnormals);
        self
    }

    /// Drops faces with area below [`DEGENERATE_AREA`]. Cached normals are
    /// discarded since face indices shift.
    pub fn drop_degenerate(mut self) -> Result<Self, MeshError> {
        let keep: Vec<[u32; 3]> = (0..self.faces.len())
            .filter(|&f| self.face_area(f) >= DEGENERATE_AREA)
            .map(|f| self.faces[f])
            .collect();
        if keep.is_empty() {
            return Err(MeshError::AllDegenerate);
        }
        self.faces = keep;
        self.face_normals = None;
        self.vertex_normals = None;
        Ok(self)
    }
}

/// Loads an OBJ or PLY file, dispatching on the extension (falling back to
/// sniffing the `ply` magic).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => obj::parse_obj(&bytes),
        Some("ply") => ply::parse_ply(&bytes),
        _ if bytes.starts_with(b"ply") => ply::parse_ply(&bytes),
        Some(other) => Err(MeshError::UnsupportedFormat(other.to_string())),
        None => obj::parse_obj(&bytes),
    }
}

/// Centers the bounding box at the origin and scales uniformly so that the
/// largest extent is exactly 2, then drops degenerate faces.
pub fn normalize_mesh(mesh: TriMesh) -> Result<TriMesh, MeshError> {
    if mesh.faces.is_empty() || mesh.vertices.is_empty() {
        return Err(MeshError::Empty);
    }
    let (lo, hi) = mesh.bounds();
    let center = (lo + hi) * 0.5;
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(MeshError::AllDegenerate);
    }
    let scale = 2.0 / extent;
    let vertices = mesh.vertices.iter().map(|v| (v - center) * scale).collect();
    let out = TriMesh {
        vertices,
        faces: mesh.faces,
        vertex_normals: None,
        face_normals: None,
    };
    out.drop_degenerate()
}

/// Right-hand-rule unit normal of every face.
pub fn face_normals(mesh: &TriMesh) -> Vec<Vec3> {
    (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.corners(f);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::zeros()
            }
        })
        .collect()
}

/// Angle-weighted average of incident face normals. Isolated vertices
/// yield `None`.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Option<Vec3>> {
    let fnormals = match &mesh.face_normals {
        Some(n) => n.clone(),
        None => face_normals(mesh),
    };
    vertex_normals_from(mesh, &fnormals)
}

fn vertex_normals_from(mesh: &TriMesh, fnormals: &[Vec3]) -> Vec<Option<Vec3>> {
    let mut acc = vec![Vec3::zeros(); mesh.vertices.len()];
    let mut touched = vec![false; mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let p = mesh.corners(f);
        for k in 0..3 {
            let e1 = p[(k + 1) % 3] - p[k];
            let e2 = p[(k + 2) % 3] - p[k];
            let denom = e1.norm() * e2.norm();
            if denom <= 0.0 {
                continue;
            }
            let angle = (e1.dot(&e2) / denom).clamp(-1.0, 1.0).acos();
            acc[face[k] as usize] += fnormals[f] * angle;
            touched[face[k] as usize] = true;
        }
    }
    acc.into_iter()
        .zip(touched)
        .map(|(n, t)| {
            let len = n.norm();
            (t && len > 1e-12).then(|| n / len)
        })
        .collect()
}
