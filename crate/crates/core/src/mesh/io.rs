//! OBJ and PLY reading, OBJ/PLY writing, and the JSON label format.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ElementKind, MeshError, PartLabeling, TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("obj") => Ok(Self::Obj),
            Some("ply") => Ok(Self::Ply),
            other => Err(MeshError::UnsupportedFormat(
                other.unwrap_or("<none>").to_string(),
            )),
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(Self::Obj),
            "ply" => Ok(Self::Ply),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Loads a mesh without modifying vertex positions. The format is taken from
/// the file extension when `format` is `None`.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriMesh, MeshError> {
    load_mesh_with_labels(path, format).map(|(m, _)| m)
}

/// Like [`load_mesh`], also returning per-face `part_id` values when a PLY
/// file carries them.
pub fn load_mesh_with_labels(
    path: &Path,
    format: Option<MeshFormat>,
) -> Result<(TriMesh, Option<Vec<i32>>), MeshError> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let bytes = std::fs::read(path)?;
    match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&bytes);
            Ok((parse_obj(&text)?, None))
        }
        MeshFormat::Ply => parse_ply(&bytes),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `v`/`f` records. Polygons are fan-triangulated; indices are 1-based
/// and may be negative (relative to the current vertex count).
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for slot in &mut xyz {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(line_no, "vertex needs 3 coordinates"))?;
                    *slot = tok
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad coordinate '{tok}'")))?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad face index '{tok}'")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(parse_err(line_no, "face index 0 is invalid in OBJ"));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(MeshError::IndexOutOfRange {
                            face: faces.len(),
                            index: idx,
                            vertex_count: vertices.len(),
                        });
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least 3 vertices"));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyEncoding {
    Ascii,
    LittleEndian,
    BigEndian,
}

#[derive(Debug, Clone, Copy)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar(ScalarType, String),
    List(ScalarType, ScalarType, String),
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    encoding: PlyEncoding,
    line: usize,
    tokens: std::vec::IntoIter<String>,
}

impl<'a> Cursor<'a> {
    fn binary_err(&self, message: impl Into<String>) -> MeshError {
        MeshError::Binary {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<String, MeshError> {
        loop {
            if let Some(t) = self.tokens.next() {
                return Ok(t);
            }
            if self.pos >= self.data.len() {
                return Err(parse_err(self.line, "unexpected end of ascii payload"));
            }
            let rest = &self.data[self.pos..];
            let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
            let line = String::from_utf8_lossy(&rest[..end]).to_string();
            self.pos += (end + 1).min(rest.len());
            self.line += 1;
            self.tokens = line
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
                .into_iter();
        }
    }

    fn read(&mut self, ty: ScalarType) -> Result<f64, MeshError> {
        if self.encoding == PlyEncoding::Ascii {
            let tok = self.next_token()?;
            return tok
                .parse::<f64>()
                .map_err(|_| parse_err(self.line, format!("bad number '{tok}'")));
        }
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(self.binary_err("unexpected end of binary payload"));
        }
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(&self.data[self.pos..self.pos + n]);
        if self.encoding == PlyEncoding::BigEndian {
            buf[..n].reverse();
        }
        self.pos += n;
        Ok(match ty {
            ScalarType::I8 => buf[0] as i8 as f64,
            ScalarType::U8 => buf[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(buf),
        })
    }
}

/// Parses ASCII or binary PLY. Returns the mesh and, if the face element has
/// an integer `part_id` property, the per-triangle labels.
pub fn parse_ply(bytes: &[u8]) -> Result<(TriMesh, Option<Vec<i32>>), MeshError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        if pos >= bytes.len() {
            return Err(parse_err(line_no, "missing end_header"));
        }
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        let line = String::from_utf8_lossy(&rest[..end]).trim().to_string();
        pos += (end + 1).min(rest.len());
        line_no += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("ply") if line_no == 1 => {}
            _ if line_no == 1 => return Err(parse_err(1, "not a PLY file")),
            Some("format") => {
                encoding = Some(match toks.get(1).copied() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::LittleEndian,
                    Some("binary_big_endian") => PlyEncoding::BigEndian,
                    other => {
                        return Err(parse_err(line_no, format!("unknown format {other:?}")))
                    }
                });
            }
            Some("element") => {
                if toks.len() != 3 {
                    return Err(parse_err(line_no, "malformed element line"));
                }
                let count = toks[2]
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad element count"))?;
                elements.push(PlyElement {
                    name: toks[1].to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                let bad = || parse_err(line_no, format!("malformed property '{line}'"));
                let prop = if toks.get(1) == Some(&"list") {
                    if toks.len() != 5 {
                        return Err(bad());
                    }
                    PlyProperty::List(
                        ScalarType::parse(toks[2]).ok_or_else(bad)?,
                        ScalarType::parse(toks[3]).ok_or_else(bad)?,
                        toks[4].to_string(),
                    )
                } else {
                    if toks.len() != 3 {
                        return Err(bad());
                    }
                    PlyProperty::Scalar(ScalarType::parse(toks[1]).ok_or_else(bad)?, toks[2].to_string())
                };
                el.properties.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(parse_err(line_no, format!("unknown header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(line_no, "missing format line"))?;
    let mut cur = Cursor {
        data: bytes,
        pos,
        encoding,
        line: line_no,
        tokens: Vec::new().into_iter(),
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut part_ids: Option<Vec<i32>> = None;
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        if is_face
            && el
                .properties
                .iter()
                .any(|p| matches!(p, PlyProperty::Scalar(_, n) if n == "part_id"))
        {
            part_ids = Some(Vec::new());
        }
        for _ in 0..el.count {
            let mut xyz = [0.0f64; 3];
            let mut poly: Vec<i64> = Vec::new();
            let mut part = None;
            for prop in &el.properties {
                match prop {
                    PlyProperty::Scalar(ty, name) => {
                        let v = cur.read(*ty)?;
                        if is_vertex {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        } else if is_face && name == "part_id" {
                            part = Some(v as i32);
                        }
                    }
                    PlyProperty::List(count_ty, item_ty, name) => {
                        let n = cur.read(*count_ty)? as usize;
                        let keep = is_face && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n {
                            let v = cur.read(*item_ty)?;
                            if keep {
                                poly.push(v as i64);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            } else if is_face {
                if poly.len() < 3 {
                    return Err(parse_err(cur.line, "face needs at least 3 vertices"));
                }
                let face_idx = faces.len();
                for &i in &poly {
                    if i < 0 || i as usize >= vertices.len() {
                        return Err(MeshError::IndexOutOfRange {
                            face: face_idx,
                            index: i,
                            vertex_count: vertices.len(),
                        });
                    }
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
                    if let Some(ids) = part_ids.as_mut() {
                        ids.push(part.unwrap_or(super::UNLABELED));
                    }
                }
            }
        }
    }
    Ok((TriMesh::new(vertices, faces)?, part_ids))
}

/// Writes an ASCII PLY whose faces carry an integer `part_id` property.
pub fn write_labeled_ply(mesh: &TriMesh, labels: &[i32]) -> Result<Vec<u8>, MeshError> {
    if labels.len() != mesh.face_count() {
        return Err(MeshError::LabelCount {
            labels: labels.len(),
            elements: mesh.face_count(),
        });
    }
    let mut out = Vec::new();
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property double {axis}")?;
    }
    writeln!(out, "element face {}", mesh.face_count())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    writeln!(out, "property int part_id")?;
    writeln!(out, "end_header")?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    for (f, &l) in mesh.faces().iter().zip(labels) {
        writeln!(out, "3 {} {} {} {}", f[0], f[1], f[2], l)?;
    }
    Ok(out)
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct LabelFile {
    element_kind: ElementKind,
    labels: Vec<i32>,
}

pub fn labeling_to_json(labeling: &PartLabeling) -> String {
    serde_json::to_string(&LabelFile {
        element_kind: labeling.element_kind,
        labels: labeling.labels.clone(),
    })
    .expect("label file serializes")
}

pub fn labeling_from_json(text: &str) -> Result<(ElementKind, Vec<i32>), MeshError> {
    let file: LabelFile = serde_json::from_str(text)?;
    Ok((file.element_kind, file.labels))
}
