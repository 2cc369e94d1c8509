//! Indexed triangle meshes and the geometry the rest of the pipeline is built on.
//!
//! A [`TriMesh`] is immutable once constructed: face normals and areas are
//! derived at construction time and every face index is validated against the
//! vertex count. Zero-area faces are kept and flagged; they carry no area weight
//! and receive no surface samples.

mod decompose;
mod io;
mod sample;
mod topology;

pub use decompose::{decompose_parts, DecomposeConfig};
pub use io::{
    labeling_from_json, labeling_to_json, load_mesh, load_mesh_with_labels, parse_obj, parse_ply,
    write_labeled_ply, write_obj, MeshFormat,
};
pub use sample::{sample_face_points, SurfacePoint};
pub use topology::{connected_components, AdjacencyKind, FaceAdjacency};
pub(crate) use topology::label_components;

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Faces with twice-area below this are treated as degenerate.
pub const DEGENERATE_AREA_EPS: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parse error at byte offset {offset}: {message}")]
    Binary { offset: usize, message: String },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("mesh has no {0}")]
    Empty(&'static str),
    #[error("mesh has zero extent (all vertices coincide)")]
    ZeroExtent,
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("label count {labels} does not match element count {elements}")]
    LabelCount { labels: usize, elements: usize },
    #[error("invalid labeling json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
}

impl TriMesh {
    /// Builds a mesh, validating indices. Fails on an empty vertex or face list.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if vertices.is_empty() {
            return Err(MeshError::Empty("vertices"));
        }
        if faces.is_empty() {
            return Err(MeshError::Empty("faces"));
        }
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: i as i64,
                        vertex_count: vertices.len(),
                    });
                }
            }
        }
        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_areas = Vec::with_capacity(faces.len());
        for f in &faces {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let norm = cross.norm();
            if norm < DEGENERATE_AREA_EPS {
                face_normals.push(Vec3::zeros());
                face_areas.push(0.0);
            } else {
                face_normals.push(cross / norm);
                face_areas.push(0.5 * norm);
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_normals,
            face_areas,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_degenerate(&self, face: usize) -> bool {
        self.face_areas[face] == 0.0
    }

    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.face_count()).filter(|&f| self.is_degenerate(f)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn face_centroid(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (a + b + c) / 3.0
    }

    pub fn face_centroids(&self) -> Vec<Vec3> {
        (0..self.face_count()).map(|f| self.face_centroid(f)).collect()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Applies `f` to every vertex, keeping the face list.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let vertices = self.vertices.iter().map(f).collect();
        Self::new(vertices, self.faces.clone()).expect("topology unchanged")
    }

    /// Concatenates meshes into one, offsetting indices.
    pub fn merge(meshes: &[TriMesh]) -> Result<Self, MeshError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| f.map(|i| i + base)));
        }
        Self::new(vertices, faces)
    }
}

/// Centers the bounding box at the origin and scales uniformly so the longest
/// axis spans exactly 1, placing the mesh inside `[-0.5, 0.5]^3`.
pub fn normalize_mesh(mesh: &TriMesh) -> Result<TriMesh, MeshError> {
    let (lo, hi) = mesh.bounds();
    let extent = (hi - lo).max();
    if !(extent.is_finite() && extent > 0.0) {
        return Err(MeshError::ZeroExtent);
    }
    let center = (lo + hi) / 2.0;
    Ok(mesh.map_vertices(|v| (v - center) / extent))
}

/// Per-element integer labels; `-1` marks an unlabeled element.
pub const UNLABELED: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Face,
    Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartLabeling {
    pub element_kind: ElementKind,
    pub labels: Vec<i32>,
    pub weights: Vec<f64>,
}

impl PartLabeling {
    /// Face labeling weighted by face area.
    pub fn for_faces(mesh: &TriMesh, labels: Vec<i32>) -> Result<Self, MeshError> {
        if labels.len() != mesh.face_count() {
            return Err(MeshError::LabelCount {
                labels: labels.len(),
                elements: mesh.face_count(),
            });
        }
        Ok(Self {
            element_kind: ElementKind::Face,
            labels,
            weights: mesh.face_areas().to_vec(),
        })
    }

    pub fn unlabeled_faces(mesh: &TriMesh) -> Self {
        Self::for_faces(mesh, vec![UNLABELED; mesh.face_count()]).expect("length matches")
    }

    pub fn for_points(labels: Vec<i32>) -> Self {
        let weights = vec![1.0; labels.len()];
        Self {
            element_kind: ElementKind::Point,
            labels,
            weights,
        }
    }

    /// Same labels, every element weighted 1.
    pub fn with_uniform_weights(&self) -> Self {
        Self {
            element_kind: self.element_kind,
            labels: self.labels.clone(),
            weights: vec![1.0; self.labels.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct non-negative labels in ascending order.
    pub fn part_ids(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self.labels.iter().copied().filter(|&l| l >= 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn part_count(&self) -> usize {
        self.part_ids().len()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    /// Renumbers labels to `0..K` in order of first appearance; `-1` is kept.
    pub fn compacted(&self) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l < 0 {
                    UNLABELED
                } else {
                    let next = map.len() as i32;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        Self {
            element_kind: self.element_kind,
            labels,
            weights: self.weights.clone(),
        }
    }
}
