//! PLY reader (ascii and binary little-endian) and binary writers.

use std::io::Write;
use std::path::Path;

use super::{MeshError, TriMesh};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self, MeshError> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(MeshError::Ply(format!("unknown scalar type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar {
        name: String,
        ty: Scalar,
    },
    List {
        name: String,
        count: Scalar,
        item: Scalar,
    },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, MeshError> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| MeshError::Ply("missing end_header".into()))?;
    let mut body_offset = end + END.len();
    // the header terminator line ends with \n or \r\n
    while body_offset < bytes.len() && bytes[body_offset] != b'\n' {
        body_offset += 1;
    }
    body_offset += 1;

    let text = String::from_utf8_lossy(&bytes[..end]);
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(MeshError::Ply("missing ply magic".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    other => return Err(MeshError::UnsupportedFormat(format!("ply {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| MeshError::Ply(format!("bad element count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::Ply("property before element".into()))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::Ply("property before element".into()))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                });
            }
            _ => return Err(MeshError::Ply(format!("unrecognized header line {line:?}"))),
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| MeshError::Ply("missing format line".into()))?,
        elements,
        body_offset,
    })
}

/// Pulls scalar values out of the body regardless of encoding.
trait ValueSource {
    fn next(&mut self, ty: Scalar) -> Result<f64, MeshError>;
}

struct AsciiSource<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueSource for AsciiSource<'_> {
    fn next(&mut self, _ty: Scalar) -> Result<f64, MeshError> {
        let t = self
            .tokens
            .next()
            .ok_or_else(|| MeshError::Ply("unexpected end of data".into()))?;
        t.parse()
            .map_err(|_| MeshError::Ply(format!("bad ascii value {t:?}")))
    }
}

struct BinarySource<'a> {
    data: &'a [u8],
    pos: usize,
}

impl ValueSource for BinarySource<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64, MeshError> {
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(MeshError::Ply("unexpected end of data".into()));
        }
        let v = ty.read_le(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }
}

pub(super) fn parse_ply(bytes: &[u8]) -> Result<TriMesh, MeshError> {
    let header = parse_header(bytes)?;
    let body = bytes.get(header.body_offset..).unwrap_or(&[]);
    let text;
    let mut source: Box<dyn ValueSource> = match header.encoding {
        Encoding::Ascii => {
            text = String::from_utf8_lossy(body);
            Box::new(AsciiSource {
                tokens: text.split_ascii_whitespace(),
            })
        }
        Encoding::BinaryLe => Box::new(BinarySource { data: body, pos: 0 }),
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &header.elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let pos_slot = |name: &str| match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        if is_vertex {
            let found = el
                .props
                .iter()
                .filter(|p| matches!(p, Property::Scalar { name, .. } if pos_slot(name).is_some()))
                .count();
            if found != 3 {
                return Err(MeshError::Ply("vertex element lacks x, y, z".into()));
            }
        }
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            for prop in &el.props {
                match prop {
                    Property::Scalar { name, ty } => {
                        let v = source.next(*ty)?;
                        if is_vertex {
                            if let Some(k) = pos_slot(name) {
                                xyz[k] = v;
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = source.next(*count)?;
                        if n < 0.0 {
                            return Err(MeshError::Ply("negative list length".into()));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            items.push(source.next(*item)?);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            if items.len() < 3 {
                                return Err(MeshError::Ply(format!(
                                    "face with {} vertices",
                                    items.len()
                                )));
                            }
                            if items.iter().any(|&i| i < 0.0) {
                                return Err(MeshError::Ply("negative face index".into()));
                            }
                            for k in 1..items.len() - 1 {
                                faces.push([items[0] as u32, items[k] as u32, items[k + 1] as u32]);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    TriMesh::new(vertices, faces)
}

fn write_ply(mesh: &TriMesh, colors: Option<&[[u8; 3]]>, path: &Path) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(64 + mesh.vertex_count() * 15 + mesh.face_count() * 13);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        mesh.vertex_count()
    )?;
    if colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    write!(
        out,
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.face_count()
    )?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        if let Some(colors) = colors {
            out.extend_from_slice(&colors[i]);
        }
    }
    for f in &mesh.faces {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    std::fs::write(path, out)
}

/// Writes positions (as f32) and faces as binary little-endian PLY.
pub fn write_ply_binary(mesh: &TriMesh, path: impl AsRef<Path>) -> std::io::Result<()> {
    write_ply(mesh, None, path.as_ref())
}

/// Same as [`write_ply_binary`] with per-vertex `red green blue` uchar
/// properties. `colors` must have one entry per vertex.
pub fn write_ply_colored(
    mesh: &TriMesh,
    colors: &[[u8; 3]],
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    assert_eq!(colors.len(), mesh.vertex_count(), "one color per vertex");
    write_ply(mesh, Some(colors), path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::primitives::icosphere;

    #[test]
    fn ascii_ply_with_extra_properties() {
        let src = "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 1\n1 0 0 2\n1 1 0 3\n0 1 0 4\n4 0 1 2 3\n";
        let m = parse_ply(src.as_bytes()).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn binary_icosphere_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.ply");
        let m = icosphere(3);
        write_ply_binary(&m, &path).unwrap();
        let back = crate::assets::load_mesh(&path).unwrap();
        assert_eq!(back.vertex_count(), 642);
        assert_eq!(back.faces, m.faces);
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.ply");
        write_ply_binary(&icosphere(1), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(parse_ply(&bytes[..bytes.len() - 5]).is_err());
    }

    #[test]
    fn big_endian_unsupported() {
        let src = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(
            parse_ply(src),
            Err(MeshError::UnsupportedFormat(_))
        ));
    }
}
