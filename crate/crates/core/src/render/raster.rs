use rayon::prelude::*;

use super::{CameraPose, RenderError, ViewSet};
use crate::mesh::{TriMesh, Vec3};

/// Face-id sentinel for pixels not covered by any face.
pub const EMPTY_FACE: u32 = u32::MAX;

/// Triangles with a vertex closer than this to the camera plane are skipped.
const NEAR_PLANE: f64 = 1e-6;

/// Per-view rasterization output. A pixel is valid iff its face id is not
/// [`EMPTY_FACE`]; invalid pixels carry zero depth, zero normal and zero point.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    pub width: u32,
    pub height: u32,
    /// World-space geometric normal of the front-most face.
    pub normal: Vec<[f32; 3]>,
    /// Camera-space depth (`z_c`), positive at valid pixels.
    pub depth: Vec<f32>,
    /// World-space surface position.
    pub point: Vec<[f32; 3]>,
    pub face_id: Vec<u32>,
}

impl RenderBuffers {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            normal: vec![[0.0; 3]; n],
            depth: vec![0.0; n],
            point: vec![[0.0; 3]; n],
            face_id: vec![EMPTY_FACE; n],
        }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn is_valid(&self, pixel: usize) -> bool {
        self.face_id[pixel] != EMPTY_FACE
    }

    pub fn face_at(&self, x: u32, y: u32) -> Option<u32> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let f = self.face_id[self.index(x, y)];
        (f != EMPTY_FACE).then_some(f)
    }

    pub fn valid_count(&self) -> usize {
        self.face_id.iter().filter(|&&f| f != EMPTY_FACE).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Continuous image coordinates; pixel `(i, j)` spans `[i, i+1) x [j, j+1)`.
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl Projection {
    /// The pixel containing the projection, if inside a `width x height` image.
    pub fn pixel(&self, width: u32, height: u32) -> Option<(u32, u32)> {
        let (x, y) = (self.u.floor(), self.v.floor());
        (x >= 0.0 && y >= 0.0 && x < width as f64 && y < height as f64).then_some((x as u32, y as u32))
    }
}

/// Projects a world point. Returns `None` for points at or behind the camera plane.
pub fn project_point(p: &Vec3, pose: &CameraPose) -> Option<Projection> {
    let c = pose.to_camera(p);
    if c.z.is_nan() || c.z <= 0.0 {
        return None;
    }
    let k = &pose.intrinsics;
    Some(Projection {
        u: k.fx * c.x / c.z + k.cx,
        v: k.fy * c.y / c.z + k.cy,
        depth: c.z,
    })
}

/// Camera-space direction through image point `(u, v)` with unit z.
#[inline]
pub fn ray_dir(u: f64, v: f64, pose: &CameraPose) -> Vec3 {
    let k = &pose.intrinsics;
    Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
}

/// World point at depth `depth` along image point `(u, v)`:
/// `R^T (K^{-1} [u, v, 1]^T * depth - t)`.
pub fn unproject(u: f64, v: f64, depth: f64, pose: &CameraPose) -> Vec3 {
    pose.to_world(&(ray_dir(u, v, pose) * depth))
}

/// Back-projects one pixel center of a depth map.
pub fn back_project_pixel(x: u32, y: u32, depth: f64, pose: &CameraPose) -> Vec3 {
    unproject(x as f64 + 0.5, y as f64 + 0.5, depth, pose)
}

/// Back-projects every valid (positive) depth pixel into world space.
pub fn back_project(depth: &[f32], pose: &CameraPose) -> Result<Vec<Option<Vec3>>, RenderError> {
    if depth.len() != pose.pixel_count() {
        let h = depth.len() / pose.width.max(1) as usize;
        return Err(RenderError::SizeMismatch {
            got_w: pose.width,
            got_h: h as u32,
            want_w: pose.width,
            want_h: pose.height,
        });
    }
    let w = pose.width as usize;
    Ok(depth
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            (d > 0.0).then(|| back_project_pixel((i % w) as u32, (i / w) as u32, d as f64, pose))
        })
        .collect())
}

/// Edge function with exact antisymmetry: evaluated on endpoints in a fixed
/// lexicographic order and negated when the edge runs the other way.
#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (lo, hi, sign) = if (a.0, a.1) <= (b.0, b.1) { (a, b, 1.0) } else { (b, a, -1.0) };
    sign * ((hi.0 - lo.0) * (p.1 - lo.1) - (hi.1 - lo.1) * (p.0 - lo.0))
}

/// Top-left ownership for pixels exactly on an edge. Positive orientation is
/// clockwise on screen (y down), so left edges run upward and top edges run
/// rightward. Two triangles sharing an edge traverse it in opposite
/// directions, so exactly one of them owns it.
#[inline]
fn owns_edge(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

/// Z-buffered perspective rasterization of `mesh` with flat (face) normals.
///
/// Each pixel center is tested against every triangle; depth comes from an
/// exact ray/plane intersection so `point` and `depth` agree with
/// [`back_project`]. Depth ties keep the lower face index.
pub fn rasterize(mesh: &TriMesh, pose: &CameraPose) -> RenderBuffers {
    let (w, h) = (pose.width, pose.height);
    let mut buf = RenderBuffers::empty(w, h);
    let mut zbuf = vec![f64::INFINITY; buf.face_id.len()];
    let k = pose.intrinsics;
    for face in 0..mesh.face_count() {
        if mesh.is_degenerate(face) {
            continue;
        }
        let tri = mesh.triangle(face);
        let cam = tri.map(|p| pose.to_camera(&p));
        if cam.iter().any(|c| c.z <= NEAR_PLANE) {
            continue;
        }
        let scr = cam.map(|c| (k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy));
        let area = edge(scr[0], scr[1], scr[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        // Orient positively so "inside" means all edge functions >= 0.
        let s = if area > 0.0 { [scr[0], scr[1], scr[2]] } else { [scr[0], scr[2], scr[1]] };
        let edges = [(s[1], s[2]), (s[2], s[0]), (s[0], s[1])];
        let owned = edges.map(|(a, b)| owns_edge(a, b));

        let min_x = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0) as i64;
        let x1 = ((max_x - 0.5).floor() as i64).min(w as i64 - 1);
        let y0 = (min_y - 0.5).ceil().max(0.0) as i64;
        let y1 = ((max_y - 0.5).floor() as i64).min(h as i64 - 1);
        if x0 > x1 || y0 > y1 {
            continue;
        }

        let plane_n = (cam[1] - cam[0]).cross(&(cam[2] - cam[0]));
        let plane_d = plane_n.dot(&cam[0]);
        let normal = mesh.face_normals()[face];
        let normal32 = [normal.x as f32, normal.y as f32, normal.z as f32];

        for py in y0..=y1 {
            for px in x0..=x1 {
                let p = (px as f64 + 0.5, py as f64 + 0.5);
                let mut inside = true;
                for (e, &(a, b)) in edges.iter().enumerate() {
                    let val = edge(a, b, p);
                    if val < 0.0 || (val == 0.0 && !owned[e]) {
                        inside = false;
                        break;
                    }
                }
                if !inside {
                    continue;
                }
                let dir = ray_dir(p.0, p.1, pose);
                let denom = plane_n.dot(&dir);
                if denom == 0.0 {
                    continue;
                }
                let depth = plane_d / denom;
                let idx = py as usize * w as usize + px as usize;
                if depth > 0.0 && depth < zbuf[idx] {
                    zbuf[idx] = depth;
                    let world = pose.to_world(&(dir * depth));
                    buf.depth[idx] = depth as f32;
                    buf.point[idx] = [world.x as f32, world.y as f32, world.z as f32];
                    buf.normal[idx] = normal32;
                    buf.face_id[idx] = face as u32;
                }
            }
        }
    }
    buf
}

/// Renders every view of `views` in parallel.
pub fn render_views(mesh: &TriMesh, views: &ViewSet) -> Vec<RenderBuffers> {
    views.views.par_iter().map(|v| rasterize(mesh, &v.pose)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{canonical_views, Intrinsics, ViewConfig};

    fn front_pose(size: u32) -> CameraPose {
        let f = size as f64 / 2.0 / 20f64.to_radians().tan();
        let k = Intrinsics {
            fx: f,
            fy: f,
            cx: size as f64 / 2.0,
            cy: size as f64 / 2.0,
        };
        CameraPose::look_at(Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::y(), k, size, size)
    }

    #[test]
    fn principal_ray_back_projects_along_axis() {
        let k = Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 32.0,
            cy: 32.0,
        };
        let pose = CameraPose {
            rotation: nalgebra::Matrix3::identity(),
            translation: Vec3::zeros(),
            intrinsics: k,
            width: 64,
            height: 64,
        };
        let p = unproject(32.0, 32.0, 1.5, &pose);
        assert_eq!(p, Vec3::new(0.0, 0.0, 1.5));
    }

    #[test]
    fn single_triangle_center_pixel() {
        let tri = TriMesh::new(
            vec![Vec3::new(-0.5, -0.5, 0.0), Vec3::new(0.5, -0.5, 0.0), Vec3::new(0.0, 0.5, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let buf = rasterize(&tri, &front_pose(64));
        let c = buf.index(32, 32);
        assert_eq!(buf.face_id[c], 0);
        let n = buf.normal[c];
        assert!((n[0]).abs() < 1e-6 && n[1].abs() < 1e-6 && (n[2] - 1.0).abs() < 1e-6);
        assert!((buf.depth[c] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn nearer_small_triangle_wins_depth_test() {
        let big = [Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let small = [Vec3::new(-0.2, -0.2, 0.3), Vec3::new(0.2, -0.2, 0.3), Vec3::new(0.0, 0.2, 0.3)];
        // Near triangle first and last: order must not matter.
        for near_first in [true, false] {
            let (first, second) = if near_first { (small, big) } else { (big, small) };
            let mut v = first.to_vec();
            v.extend(second);
            let mesh = TriMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
            let buf = rasterize(&mesh, &front_pose(64));
            let near_id = if near_first { 0 } else { 1 };
            assert_eq!(buf.face_id[buf.index(32, 32)], near_id);
            assert_eq!(buf.face_id[buf.index(2, 2)], EMPTY_FACE);
        }
    }

    #[test]
    fn shared_edge_pixels_are_covered_exactly_once() {
        // Quad whose diagonal passes exactly through pixel centers.
        let pose = CameraPose {
            rotation: nalgebra::Matrix3::identity(),
            translation: Vec3::new(0.0, 0.0, 0.0),
            intrinsics: Intrinsics {
                fx: 16.0,
                fy: 16.0,
                cx: 0.0,
                cy: 0.0,
            },
            width: 16,
            height: 16,
        };
        // Screen corners (0.5,0.5) .. (15.5,15.5) at depth 1.
        let s = |x: f64, y: f64| Vec3::new(x / 16.0, y / 16.0, 1.0);
        let v = vec![s(0.5, 0.5), s(15.5, 0.5), s(15.5, 15.5), s(0.5, 15.5)];
        let q = TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let single_a = rasterize(&TriMesh::new(q.vertices().to_vec(), vec![[0, 1, 2]]).unwrap(), &pose);
        let single_b = rasterize(&TriMesh::new(q.vertices().to_vec(), vec![[0, 2, 3]]).unwrap(), &pose);
        for i in 0..single_a.face_id.len() {
            let a = single_a.is_valid(i);
            let b = single_b.is_valid(i);
            let (x, y) = (i % 16, i / 16);
            if x == y && x < 15 {
                assert!(a ^ b, "diagonal pixel {x} covered {a} {b}");
            }
            assert!(!(a && b), "pixel {i} double covered");
        }
    }

    #[test]
    fn identical_inputs_give_identical_buffers() {
        let mesh = crate::synth::icosphere(2, 0.5);
        let vs = canonical_views(&ViewConfig::default().with_image_size(96)).unwrap();
        let a = render_views(&mesh, &vs);
        let b = render_views(&mesh, &vs);
        assert_eq!(a, b);
    }

    #[test]
    fn pixel_round_trips_through_projection() {
        let mesh = crate::synth::unit_cube();
        let vs = canonical_views(&ViewConfig::default().with_image_size(64)).unwrap();
        let buf = rasterize(&mesh, vs.pose(1));
        for i in (0..buf.face_id.len()).filter(|&i| buf.is_valid(i)) {
            let p = buf.point[i];
            let pr = project_point(&Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64), vs.pose(1)).unwrap();
            let (x, y) = ((i % 64) as f64 + 0.5, (i / 64) as f64 + 0.5);
            assert!((pr.u - x).abs() < 0.5 && (pr.v - y).abs() < 0.5);
            assert!((pr.depth - buf.depth[i] as f64).abs() < 1e-5);
        }
    }

    #[test]
    fn behind_camera_is_invalid() {
        let pose = front_pose(32);
        assert!(project_point(&Vec3::new(0.0, 0.0, 3.0), &pose).is_none());
    }
}
