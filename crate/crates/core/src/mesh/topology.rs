use std::collections::HashMap;

use super::{PartLabeling, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjacencyKind {
    /// Faces sharing an edge.
    #[default]
    Edge,
    /// Faces sharing at least one vertex.
    Vertex,
}

/// For each face, the sorted list of faces adjacent to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceAdjacency {
    neighbors: Vec<Vec<u32>>,
}

impl FaceAdjacency {
    pub fn build(mesh: &TriMesh, kind: AdjacencyKind) -> Self {
        let n = mesh.face_count();
        let mut groups: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (fi, f) in mesh.faces().iter().enumerate() {
            match kind {
                AdjacencyKind::Edge => {
                    for k in 0..3 {
                        let (a, b) = (f[k], f[(k + 1) % 3]);
                        if a == b {
                            continue;
                        }
                        groups.entry((a.min(b), a.max(b))).or_default().push(fi as u32);
                    }
                }
                AdjacencyKind::Vertex => {
                    for &v in f {
                        groups.entry((v, v)).or_default().push(fi as u32);
                    }
                }
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for faces in groups.values() {
            for &a in faces {
                for &b in faces {
                    if a != b {
                        neighbors[a as usize].push(b);
                    }
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    pub fn edge(mesh: &TriMesh) -> Self {
        Self::build(mesh, AdjacencyKind::Edge)
    }

    pub fn neighbors(&self, face: usize) -> &[u32] {
        &self.neighbors[face]
    }

    pub fn face_count(&self) -> usize {
        self.neighbors.len()
    }
}

/// Labels faces by connected component in order of lowest face index.
pub fn connected_components(mesh: &TriMesh, kind: AdjacencyKind) -> PartLabeling {
    let adj = FaceAdjacency::build(mesh, kind);
    let labels = label_components(&adj, |_, _| true);
    PartLabeling::for_faces(mesh, labels).expect("one label per face")
}

/// Flood-fills faces into components, crossing an edge only when
/// `joinable(a, b)` holds. Labels are numbered by lowest face index.
pub(crate) fn label_components(
    adj: &FaceAdjacency,
    mut joinable: impl FnMut(usize, usize) -> bool,
) -> Vec<i32> {
    let n = adj.face_count();
    let mut labels = vec![-1i32; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] >= 0 {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(f) = stack.pop() {
            for &g in adj.neighbors(f) {
                let g = g as usize;
                if labels[g] < 0 && joinable(f, g) {
                    labels[g] = next;
                    stack.push(g);
                }
            }
        }
        next += 1;
    }
    labels
}
