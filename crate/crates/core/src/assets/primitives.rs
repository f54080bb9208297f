//! Procedural meshes used as fixtures and for smoke runs.

use std::collections::HashMap;

use super::TriMesh;
use crate::Vec3;

/// Unit-radius icosphere with `subdivisions` rounds of 4-to-1 splitting.
///
/// Poles sit on the ±y axis so the bottom pole is a vertex. Vertex count is
/// `10 * 4^n + 2`. Faces wind counter-clockwise seen from outside.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let ring_y = 1.0 / 5f64.sqrt();
    let ring_r = 2.0 / 5f64.sqrt();
    let mut vertices = vec![Vec3::new(0.0, 1.0, 0.0)];
    for k in 0..5 {
        let a = (k as f64 * 72.0).to_radians();
        vertices.push(Vec3::new(ring_r * a.cos(), ring_y, ring_r * a.sin()));
    }
    for k in 0..5 {
        let a = (k as f64 * 72.0 + 36.0).to_radians();
        vertices.push(Vec3::new(ring_r * a.cos(), -ring_y, ring_r * a.sin()));
    }
    vertices.push(Vec3::new(0.0, -1.0, 0.0));

    let mut faces = Vec::with_capacity(20);
    for k in 0..5u32 {
        let u0 = 1 + k;
        let u1 = 1 + (k + 1) % 5;
        let l0 = 6 + k;
        let l1 = 6 + (k + 1) % 5;
        faces.push([0, u0, u1]);
        faces.push([u0, l0, u1]);
        faces.push([u1, l0, l1]);
        faces.push([11, l1, l0]);
    }

    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = (verts[a as usize] + verts[b as usize]).normalize();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    // make every face wind outward
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }

    TriMesh::new(vertices, faces).expect("icosphere is well formed")
}

/// Axis-aligned box with 8 corners and 12 outward-facing triangles.
pub fn axis_box(lo: Vec3, hi: Vec3) -> TriMesh {
    let vertices: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    // quads listed counter-clockwise seen from outside
    let quads = [
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
    ];
    let faces = quads
        .iter()
        .flat_map(|&[a, b, c, d]| [[a, b, c], [a, c, d]])
        .collect();
    TriMesh::new(vertices, faces).expect("box is well formed")
}

/// Flat `nx` by `ny` cell grid on the z = 0 plane spanning [0,1]², normal +z.
pub fn grid(nx: u32, ny: u32) -> TriMesh {
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(i as f64 / nx as f64, j as f64 / ny as f64, 0.0));
        }
    }
    let idx = |i: u32, j: u32| j * (nx + 1) + i;
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid is well formed")
}

/// Concatenates meshes, offsetting indices.
pub fn merge(meshes: &[TriMesh]) -> TriMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in meshes {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(&m.vertices);
        faces.extend(m.faces.iter().map(|f| f.map(|i| i + base)));
    }
    TriMesh::new(vertices, faces).expect("merged meshes are well formed")
}
