//! Wavefront OBJ reader (positions and faces; polygons are fan-triangulated).

use super::{MeshError, TriMesh};
use crate::Vec3;

pub(super) fn parse_obj(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    let text = String::from_utf8_lossy(bytes);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut normals = 0usize;
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let xyz = parse_floats(tokens, 3, line)?;
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            "vn" => {
                parse_floats(tokens, 3, line)?;
                normals += 1;
            }
            "f" => {
                let idx: Vec<u32> = tokens
                    .map(|t| resolve_index(t, vertices.len(), line))
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("face with {} vertices", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    log::trace!(
        "obj: {} positions, {} normals (recomputed), {} triangles",
        vertices.len(),
        normals,
        faces.len()
    );
    TriMesh::new(vertices, faces)
}

fn parse_floats<'a>(
    tokens: impl Iterator<Item = &'a str>,
    want: usize,
    line: usize,
) -> Result<Vec<f64>, MeshError> {
    let vals: Vec<f64> = tokens
        .take(want)
        .map(|t| {
            t.parse::<f64>().map_err(|_| MeshError::Parse {
                line,
                message: format!("bad number {t:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if vals.len() < want {
        return Err(MeshError::Parse {
            line,
            message: format!("expected {want} numbers"),
        });
    }
    Ok(vals)
}

/// Resolves `a`, `a/b`, `a//c`, `a/b/c` and negative (relative) indices.
fn resolve_index(token: &str, n_vertices: usize, line: usize) -> Result<u32, MeshError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("bad face index {token:?}"),
    })?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r - 1),
        r => Some(n_vertices as i64 + r),
    };
    match resolved {
        Some(i) if i >= 0 && (i as usize) < n_vertices => Ok(i as u32),
        _ => Err(MeshError::Parse {
            line,
            message: format!("face index {raw} out of range"),
        }),
    }
}
