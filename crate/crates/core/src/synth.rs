//! Procedural test meshes with known part structure.
//!
//! Every generator produces outward-wound triangles. Multi-part generators
//! return the mesh together with its ground-truth face labels.

use std::collections::HashMap;

use crate::mesh::{TriMesh, Vec3};

/// Axis-aligned box from `lo` to `hi`, 8 vertices and 12 triangles.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriMesh {
    let v = |x: usize, y: usize, z: usize| {
        Vec3::new(
            if x == 0 { lo.x } else { hi.x },
            if y == 0 { lo.y } else { hi.y },
            if z == 0 { lo.z } else { hi.z },
        )
    };
    let vertices = vec![
        v(0, 0, 0),
        v(1, 0, 0),
        v(1, 1, 0),
        v(0, 1, 0),
        v(0, 0, 1),
        v(1, 0, 1),
        v(1, 1, 1),
        v(0, 1, 1),
    ];
    let quads = [
        [0, 3, 2, 1], // -z
        [4, 5, 6, 7], // +z
        [0, 1, 5, 4], // -y
        [3, 7, 6, 2], // +y
        [0, 4, 7, 3], // -x
        [1, 2, 6, 5], // +x
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriMesh::new(vertices, faces).expect("valid box")
}

/// The cube `[-0.5, 0.5]^3`, already normalized.
pub fn unit_cube() -> TriMesh {
    box_mesh(Vec3::repeat(-0.5), Vec3::repeat(0.5))
}

/// Box whose six sides are each tessellated into an `n x n` grid of quads.
pub fn subdivided_box(lo: Vec3, hi: Vec3, n: usize) -> TriMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut index: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let n_i = n as i64;
    let mut vid = |g: (i64, i64, i64), vertices: &mut Vec<Vec3>| -> u32 {
        *index.entry(g).or_insert_with(|| {
            let t = |k: i64, a: f64, b: f64| a + (b - a) * k as f64 / n as f64;
            vertices.push(Vec3::new(t(g.0, lo.x, hi.x), t(g.1, lo.y, hi.y), t(g.2, lo.z, hi.z)));
            (vertices.len() - 1) as u32
        })
    };
    // Each side: fixed axis, fixed value, and two in-plane axes ordered so the
    // cross product points outward.
    let sides: [(usize, i64, usize, usize); 6] = [
        (0, 0, 2, 1),
        (0, n_i, 1, 2),
        (1, 0, 0, 2),
        (1, n_i, 2, 0),
        (2, 0, 1, 0),
        (2, n_i, 0, 1),
    ];
    for (axis, value, a, b) in sides {
        for i in 0..n_i {
            for j in 0..n_i {
                let corner = |di: i64, dj: i64| {
                    let mut g = [0i64; 3];
                    g[axis] = value;
                    g[a] = i + di;
                    g[b] = j + dj;
                    (g[0], g[1], g[2])
                };
                let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                let q = q.map(|g| vid(g, &mut vertices));
                faces.push([q[0], q[1], q[2]]);
                faces.push([q[0], q[2], q[3]]);
            }
        }
    }
    TriMesh::new(vertices, faces).expect("valid box")
}

/// Subdivided icosahedron of the given radius centered at the origin.
pub fn icosphere(subdivisions: usize, radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = (vertices[a as usize] + vertices[b as usize]).normalize();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriMesh::new(vertices, faces).expect("valid icosphere")
}

/// Latitude/longitude sphere with `segments` around and `rings` from pole to pole.
pub fn uv_sphere(segments: usize, rings: usize, radius: f64) -> TriMesh {
    let mut vertices = vec![Vec3::new(0.0, radius, 0.0)];
    for r in 1..rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.cos(),
                -radius * phi.sin() * theta.sin(),
            ));
        }
    }
    vertices.push(Vec3::new(0.0, -radius, 0.0));
    let south = (vertices.len() - 1) as u32;
    let ring = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r + 1, s), ring(r + 1, s + 1), ring(r, s + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriMesh::new(vertices, faces).expect("valid uv sphere")
}

pub fn tetrahedron(center: Vec3, size: f64) -> TriMesh {
    let vertices = [
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ]
    .iter()
    .map(|v| center + v * size)
    .collect();
    TriMesh::new(vertices, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).expect("valid tetrahedron")
}

/// Two disjoint tetrahedra: 8 vertices, 8 faces, 2 components.
pub fn two_tetrahedra() -> TriMesh {
    TriMesh::merge(&[
        tetrahedron(Vec3::new(-1.0, 0.0, 0.0), 0.5),
        tetrahedron(Vec3::new(1.0, 0.0, 0.0), 0.5),
    ])
    .unwrap()
}

/// Concatenates meshes and labels every face with the index of its source mesh.
pub fn assemble(pieces: &[TriMesh]) -> (TriMesh, Vec<i32>) {
    let labels = pieces
        .iter()
        .enumerate()
        .flat_map(|(i, m)| std::iter::repeat_n(i as i32, m.face_count()))
        .collect();
    (TriMesh::merge(pieces).expect("nonempty pieces"), labels)
}

/// `count` disjoint small cubes laid out on a grid.
pub fn cube_grid(count: usize, size: f64, spacing: f64) -> (TriMesh, Vec<i32>) {
    let per_row = (count as f64).sqrt().ceil() as usize;
    let pieces: Vec<TriMesh> = (0..count)
        .map(|i| {
            let lo = Vec3::new(
                (i % per_row) as f64 * spacing,
                0.0,
                (i / per_row) as f64 * spacing,
            );
            box_mesh(lo, lo + Vec3::repeat(size))
        })
        .collect();
    assemble(&pieces)
}

/// Flat strip of `quads` unit quads along +x in the z = 0 plane, facing +z.
pub fn flat_strip(quads: usize) -> TriMesh {
    let mut vertices = Vec::new();
    for i in 0..=quads {
        vertices.push(Vec3::new(i as f64, 0.0, 0.0));
        vertices.push(Vec3::new(i as f64, 1.0, 0.0));
    }
    let mut faces = Vec::new();
    for i in 0..quads as u32 {
        let (a, b, c, d) = (2 * i, 2 * i + 2, 2 * i + 3, 2 * i + 1);
        faces.push([a, b, c]);
        faces.push([a, c, d]);
    }
    TriMesh::new(vertices, faces).unwrap()
}

/// Two icospheres joined by a long, two-triangle sliver bridge. The returned
/// labels mark which sphere each face belongs to; bridge faces are labeled
/// with the sphere nearer to their centroid.
pub fn dumbbell() -> (TriMesh, Vec<i32>) {
    let radius = 0.2;
    let sphere = icosphere(3, radius);
    let offset = 0.45;
    let (a_vertices, a_faces) = with_short_edge(&sphere, 1e-3);
    // Sphere A sits at -x with its short edge pointing +x; B mirrors it.
    let rot_a = |v: &Vec3| Vec3::new(v.x - offset, v.y, v.z);
    let rot_b = |v: &Vec3| Vec3::new(-v.x + offset, v.y, -v.z);
    let n_a = a_vertices.len() as u32;
    let mut vertices: Vec<Vec3> = a_vertices.iter().map(rot_a).collect();
    vertices.extend(a_vertices.iter().map(rot_b));
    let mut faces = a_faces.clone();
    faces.extend(a_faces.iter().map(|f| [f[0] + n_a, f[1] + n_a, f[2] + n_a]));
    let mut labels: Vec<i32> = std::iter::repeat_n(0, a_faces.len())
        .chain(std::iter::repeat_n(1, a_faces.len()))
        .collect();
    // The short edge is (p, q) = (last-but-one, last) vertex of sphere A.
    let p = n_a - 2;
    let q = n_a - 1;
    let (pb, qb) = (p + n_a, q + n_a);
    // The edge (p, q) is traversed p->q in A's faces; bridge faces use it as q->p.
    faces.push([q, p, pb]);
    faces.push([q, pb, qb]);
    labels.extend([0, 1]);
    (TriMesh::new(vertices, faces).unwrap(), labels)
}

/// Splits the edge at the +x pole of `sphere` by inserting a vertex at distance
/// `len` from the pole vertex, returning vertices and faces. The pole vertex
/// and the inserted vertex are the last two vertices.
fn with_short_edge(sphere: &TriMesh, len: f64) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let verts = sphere.vertices();
    let pole = (0..verts.len())
        .max_by(|&a, &b| verts[a].x.total_cmp(&verts[b].x))
        .unwrap() as u32;
    // Any neighbor of the pole gives an edge to split.
    let other = sphere
        .faces()
        .iter()
        .find(|f| f.contains(&pole))
        .map(|f| *f.iter().find(|&&i| i != pole).unwrap())
        .unwrap();
    let mut vertices = verts.to_vec();
    let dir = (vertices[other as usize] - vertices[pole as usize]).normalize();
    let inserted = vertices[pole as usize] + dir * len;
    // Reorder so pole and inserted vertex are last: swap pole with the last vertex.
    let last = (vertices.len() - 1) as u32;
    vertices.swap(pole as usize, last as usize);
    let remap = |i: u32| {
        if i == pole {
            last
        } else if i == last {
            pole
        } else {
            i
        }
    };
    let other = remap(other);
    let pole = last;
    vertices.push(inserted);
    let q = pole + 1;
    let mut faces = Vec::new();
    for f in sphere.faces() {
        let f = f.map(remap);
        let has_edge = f.contains(&pole) && f.contains(&other);
        if !has_edge {
            faces.push(f);
            continue;
        }
        // Replace triangle (pole, other, x) with (pole, q, x) + (q, other, x),
        // preserving winding.
        let k = f.iter().position(|&i| i == pole).unwrap();
        let rot = [f[k], f[(k + 1) % 3], f[(k + 2) % 3]];
        if rot[1] == other {
            faces.push([pole, q, rot[2]]);
            faces.push([q, other, rot[2]]);
        } else {
            // rot = [pole, x, other]
            faces.push([pole, rot[1], q]);
            faces.push([q, rot[1], other]);
        }
    }
    (vertices, faces)
}

/// Keeps the faces for which `keep` holds, carrying labels along.
pub fn retain_faces(mesh: &TriMesh, mut keep: impl FnMut(usize) -> bool) -> TriMesh {
    let faces = (0..mesh.face_count())
        .filter(|&f| keep(f))
        .map(|f| mesh.faces()[f])
        .collect();
    TriMesh::new(mesh.vertices().to_vec(), faces).expect("at least one face kept")
}

/// Table: a slab top floating just above four open-topped legs. The underside
/// of the top and the inner leg sides are hidden from the high-elevation views.
pub fn table(subdiv: usize) -> (TriMesh, Vec<i32>) {
    let top = subdivided_box(Vec3::new(-0.5, 0.1, -0.35), Vec3::new(0.5, 0.2, 0.35), subdiv);
    let mut pieces = vec![top];
    for (sx, sz) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
        let c = Vec3::new(0.35 * sx, 0.0, 0.2 * sz);
        let leg = subdivided_box(
            Vec3::new(c.x - 0.05, -0.45, c.z - 0.05),
            Vec3::new(c.x + 0.05, 0.08, c.z + 0.05),
            subdiv.div_ceil(2).max(2),
        );
        // The cap under the slab is never visible; leave the tube open there.
        let normals = leg.face_normals().to_vec();
        pieces.push(retain_faces(&leg, |f| normals[f].y < 0.5));
    }
    assemble(&pieces)
}

/// Three stacked, slightly separated spheres of decreasing size.
pub fn snowman(subdivisions: usize) -> (TriMesh, Vec<i32>) {
    let pieces: Vec<TriMesh> = [(-0.25, 0.25), (0.14, 0.14), (0.37, 0.08)]
        .iter()
        .map(|&(y, r)| {
            let s = icosphere(subdivisions, r);
            s.map_vertices(|v| v + Vec3::new(0.0, y, 0.0))
        })
        .collect();
    assemble(&pieces)
}

/// Labels faces of `mesh` by which of the `k` azimuthal sectors around the y
/// axis contains their centroid.
pub fn sector_labels(mesh: &TriMesh, k: usize) -> Vec<i32> {
    (0..mesh.face_count())
        .map(|f| {
            let c = mesh.face_centroid(f);
            let angle = c.z.atan2(c.x).rem_euclid(2.0 * std::f64::consts::PI);
            ((angle / (2.0 * std::f64::consts::PI) * k as f64) as usize).min(k - 1) as i32
        })
        .collect()
}

/// Labels faces by the sign pattern of their dominant normal axis (six sides).
pub fn box_side_labels(mesh: &TriMesh) -> Vec<i32> {
    mesh.face_normals()
        .iter()
        .map(|n| {
            let axis = n.iamax();
            (2 * axis + usize::from(n[axis] > 0.0)) as i32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{connected_components, AdjacencyKind, FaceAdjacency};

    fn is_closed_and_outward(mesh: &TriMesh) {
        let adj = FaceAdjacency::edge(mesh);
        for f in 0..mesh.face_count() {
            assert_eq!(adj.neighbors(f).len(), 3, "face {f} not closed");
        }
        // Divergence theorem: signed volume is positive for outward winding.
        let vol: f64 = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum();
        assert!(vol > 0.0);
    }

    #[test]
    fn generators_are_closed_and_outward() {
        is_closed_and_outward(&unit_cube());
        is_closed_and_outward(&subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 4));
        is_closed_and_outward(&icosphere(2, 0.5));
        is_closed_and_outward(&uv_sphere(12, 8, 0.5));
        is_closed_and_outward(&tetrahedron(Vec3::zeros(), 1.0));
    }

    #[test]
    fn dumbbell_is_one_edge_component() {
        let (mesh, labels) = dumbbell();
        assert_eq!(connected_components(&mesh, AdjacencyKind::Edge).part_count(), 1);
        assert_eq!(labels.len(), mesh.face_count());
        assert!(mesh.degenerate_faces().is_empty());
    }

    #[test]
    fn subdivided_box_face_count() {
        let m = subdivided_box(Vec3::zeros(), Vec3::repeat(1.0), 3);
        assert_eq!(m.face_count(), 6 * 9 * 2);
        assert_eq!(m.vertex_count(), 6 * 16 - 12 * 4 + 8);
    }
}
