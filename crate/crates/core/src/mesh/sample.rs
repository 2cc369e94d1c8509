use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: u32,
    pub position: Vec3,
    /// Barycentric weights of `position` with respect to the host face.
    pub barycentric: [f64; 3],
}

/// Draws `samples_per_face` points uniformly over each non-degenerate face.
///
/// Degenerate faces receive no samples. Output is grouped by face in face
/// order and is a pure function of `(mesh, samples_per_face, seed)`.
pub fn sample_face_points(mesh: &TriMesh, samples_per_face: usize, seed: u64) -> Vec<SurfacePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(mesh.face_count() * samples_per_face);
    for face in 0..mesh.face_count() {
        if mesh.is_degenerate(face) {
            continue;
        }
        let [a, b, c] = mesh.triangle(face);
        for _ in 0..samples_per_face {
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let s = r1.sqrt();
            let bary = [1.0 - s, s * (1.0 - r2), s * r2];
            out.push(SurfacePoint {
                face: face as u32,
                position: a * bary[0] + b * bary[1] + c * bary[2],
                barycentric: bary,
            });
        }
    }
    out
}
