//! Lifting per-view masks to 3D labels by visibility voting.
//!
//! Every face is sampled, each sample is projected into every view, and a
//! view's mask label counts as a vote only where the sample is visible: its
//! projected depth must match the rendered depth within `tol`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{sample_face_points, FaceAdjacency, PartLabeling, TriMesh, Vec3, UNLABELED};
use crate::render::{project_point, CameraPose, RenderBuffers, ViewSet};
use crate::segment::MaskSet;

pub const DEFAULT_DEPTH_TOL: f64 = 0.001;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("expected {expected} views, got {got}")]
    ViewCount { expected: usize, got: usize },
    #[error("view {view}: raster is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    Dimension {
        view: usize,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
}

/// How the rendered surface depth at a projected point is read back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthLookup {
    /// The depth stored at the pixel containing the projection.
    NearestPixel,
    /// Casts the point's own camera ray against the faces shown in the 3x3
    /// pixel neighborhood of the projection and their edge neighbors.
    #[default]
    LocalRayCast,
}

/// How a set of votes becomes one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteRule {
    /// Most frequent label; ties go to the lowest label.
    #[default]
    Plurality,
    /// Numerically largest label seen.
    MaxLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftConfig {
    pub samples_per_face: usize,
    pub seed: u64,
    pub tol: f64,
    pub lookup: DepthLookup,
    pub vote: VoteRule,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            samples_per_face: 5,
            seed: 0,
            tol: DEFAULT_DEPTH_TOL,
            lookup: DepthLookup::default(),
            vote: VoteRule::default(),
        }
    }
}

/// Literal visibility test against a depth map: the pixel containing the
/// projection must be valid and its depth within `tol` of the projected depth.
pub fn visibility_test(p: &Vec3, pose: &CameraPose, depth: &[f32], tol: f64) -> bool {
    visible_pixel_nearest(p, pose, depth, tol).is_some()
}

fn visible_pixel_nearest(p: &Vec3, pose: &CameraPose, depth: &[f32], tol: f64) -> Option<usize> {
    let proj = project_point(p, pose)?;
    let (x, y) = proj.pixel(pose.width, pose.height)?;
    let i = y as usize * pose.width as usize + x as usize;
    let d = depth[i];
    (d > 0.0 && (proj.depth - d as f64).abs() < tol).then_some(i)
}

/// Ray parameter of the hit of `origin + t * dir` with `tri`, if any.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Visibility against full render buffers. Returns the pixel containing the
/// projection when the point is visible.
///
/// With [`DepthLookup::LocalRayCast`] the point is visible when some pixel in
/// its 3x3 neighborhood is covered and no candidate face crosses the camera
/// ray more than `tol` in front of the point. Edge neighbors are candidates
/// because a grazing occluder near a silhouette may cover no pixel center.
pub fn visible_pixel(
    p: &Vec3,
    pose: &CameraPose,
    buffers: &RenderBuffers,
    mesh: &TriMesh,
    adjacency: &FaceAdjacency,
    tol: f64,
    lookup: DepthLookup,
) -> Option<usize> {
    match lookup {
        DepthLookup::NearestPixel => visible_pixel_nearest(p, pose, &buffers.depth, tol),
        DepthLookup::LocalRayCast => {
            let proj = project_point(p, pose)?;
            let (x, y) = proj.pixel(pose.width, pose.height)?;
            let mut shown: Vec<u32> = Vec::with_capacity(9);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 {
                        continue;
                    }
                    if let Some(f) = buffers.face_at(nx as u32, ny as u32) {
                        shown.push(f);
                    }
                }
            }
            if shown.is_empty() {
                return None;
            }
            let mut candidates = shown.clone();
            for &f in &shown {
                candidates.extend_from_slice(adjacency.neighbors(f as usize));
            }
            candidates.sort_unstable();
            candidates.dedup();
            let origin = pose.center();
            let dir = p - origin;
            // Ray parameter 1 is the point itself; depth scales linearly with it.
            let limit = 1.0 - tol / proj.depth;
            let occluded = candidates
                .iter()
                .any(|&f| ray_triangle(&origin, &dir, &mesh.triangle(f as usize)).is_some_and(|t| t > 0.0 && t < limit));
            (!occluded).then(|| buffers.index(x, y))
        }
    }
}

/// Resolves votes. Negative labels are ignored; no votes gives [`UNLABELED`].
pub fn vote(labels: &[i32], rule: VoteRule) -> i32 {
    match rule {
        VoteRule::MaxLabel => labels.iter().copied().filter(|&l| l >= 0).max().unwrap_or(UNLABELED),
        VoteRule::Plurality => {
            let mut sorted: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
            sorted.sort_unstable();
            let mut best = (0usize, UNLABELED);
            let mut i = 0;
            while i < sorted.len() {
                let mut j = i;
                while j < sorted.len() && sorted[j] == sorted[i] {
                    j += 1;
                }
                // Ascending order means a strict comparison keeps the lowest on ties.
                if j - i > best.0 {
                    best = (j - i, sorted[i]);
                }
                i = j;
            }
            best.1
        }
    }
}

fn check_dims(views: &ViewSet, buffers: &[RenderBuffers], masks: &MaskSet) -> Result<(), LiftError> {
    for got in [buffers.len(), masks.views.len()] {
        if got != views.len() {
            return Err(LiftError::ViewCount {
                expected: views.len(),
                got,
            });
        }
    }
    let (want_w, want_h) = (views.width(), views.height());
    for (view, b) in buffers.iter().enumerate() {
        if (b.width, b.height) != (want_w, want_h) {
            return Err(LiftError::Dimension {
                view,
                got_w: b.width,
                got_h: b.height,
                want_w,
                want_h,
            });
        }
    }
    if (masks.width, masks.height) != (want_w, want_h) || masks.views.iter().any(|v| v.len() != views.views[0].pose.pixel_count()) {
        return Err(LiftError::Dimension {
            view: 0,
            got_w: masks.width,
            got_h: masks.height,
            want_w,
            want_h,
        });
    }
    Ok(())
}

/// Pixel a visible point reads its label from. A sample of `own` face reads
/// the pixel nearest its projection, within the 3x3 neighborhood, that shows
/// that face, and abstains when none does; a free point reads `hit`.
fn label_pixel(p: &Vec3, pose: &CameraPose, buffers: &RenderBuffers, own: Option<u32>, hit: usize) -> Option<usize> {
    let Some(face) = own else {
        return Some(hit);
    };
    if buffers.face_id[hit] == face {
        return Some(hit);
    }
    let proj = project_point(p, pose)?;
    let (x, y) = proj.pixel(pose.width, pose.height)?;
    let mut best: Option<(f64, usize)> = None;
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || buffers.face_at(nx as u32, ny as u32) != Some(face) {
                continue;
            }
            let d = (nx as f64 + 0.5 - proj.u).powi(2) + (ny as f64 + 0.5 - proj.v).powi(2);
            let i = buffers.index(nx as u32, ny as u32);
            if best.is_none_or(|b| (d, i) < b) {
                best = Some((d, i));
            }
        }
    }
    best.map(|b| b.1)
}

/// Votes collected for one point across all views. `face` is the face the
/// point was sampled from, if any.
#[allow(clippy::too_many_arguments)]
pub fn point_votes(
    p: &Vec3,
    face: Option<u32>,
    mesh: &TriMesh,
    adjacency: &FaceAdjacency,
    views: &ViewSet,
    buffers: &[RenderBuffers],
    masks: &MaskSet,
    config: &LiftConfig,
) -> Vec<i32> {
    let mut votes = Vec::new();
    for (k, view) in views.views.iter().enumerate() {
        let px = visible_pixel(p, &view.pose, &buffers[k], mesh, adjacency, config.tol, config.lookup)
            .and_then(|hit| label_pixel(p, &view.pose, &buffers[k], face, hit));
        if let Some(px) = px {
            let label = masks.views[k][px];
            if label >= 0 {
                votes.push(label);
            }
        }
    }
    votes
}

/// Per-face labels: each sample takes the vote of its visible views, each face
/// the vote of its samples.
pub fn lift_masks(
    mesh: &TriMesh,
    views: &ViewSet,
    buffers: &[RenderBuffers],
    masks: &MaskSet,
    config: &LiftConfig,
) -> Result<PartLabeling, LiftError> {
    check_dims(views, buffers, masks)?;
    let adjacency = FaceAdjacency::edge(mesh);
    let samples = sample_face_points(mesh, config.samples_per_face, config.seed);
    let point_labels: Vec<(u32, i32)> = samples
        .par_iter()
        .map(|s| {
            let votes = point_votes(&s.position, Some(s.face), mesh, &adjacency, views, buffers, masks, config);
            (s.face, vote(&votes, config.vote))
        })
        .collect();
    let mut per_face: Vec<Vec<i32>> = vec![Vec::new(); mesh.face_count()];
    for (face, label) in point_labels {
        per_face[face as usize].push(label);
    }
    let labels = per_face.par_iter().map(|votes| vote(votes, config.vote)).collect();
    Ok(PartLabeling::for_faces(mesh, labels).expect("one label per face"))
}

/// Labels an arbitrary point set with the same visibility voting.
pub fn lift_to_points(
    points: &[Vec3],
    mesh: &TriMesh,
    views: &ViewSet,
    buffers: &[RenderBuffers],
    masks: &MaskSet,
    config: &LiftConfig,
) -> Result<PartLabeling, LiftError> {
    check_dims(views, buffers, masks)?;
    let adjacency = FaceAdjacency::edge(mesh);
    let labels = points
        .par_iter()
        .map(|p| vote(&point_votes(p, None, mesh, &adjacency, views, buffers, masks, config), config.vote))
        .collect();
    Ok(PartLabeling::for_points(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{canonical_views, render_views, ViewConfig};
    use crate::segment::{oracle_masks, MaskSet};
    use crate::synth;

    #[test]
    fn plurality_ties_and_ignores_unlabeled() {
        assert_eq!(vote(&[], VoteRule::Plurality), -1);
        assert_eq!(vote(&[-1, -1], VoteRule::Plurality), -1);
        assert_eq!(vote(&[3, 1, 3, 1], VoteRule::Plurality), 1);
        assert_eq!(vote(&[2, 5, 5, -1, -1, -1], VoteRule::Plurality), 5);
        assert_eq!(vote(&[2, 5, 5], VoteRule::MaxLabel), 5);
        assert_eq!(vote(&[7, 2, 2], VoteRule::MaxLabel), 7);
    }

    #[test]
    fn cube_front_face_visible_back_face_hidden() {
        let mesh = synth::unit_cube();
        let views = canonical_views(&ViewConfig::default().with_image_size(128)).unwrap();
        let buffers = render_views(&mesh, &views);
        let adj = FaceAdjacency::edge(&mesh);
        // View 0 sits on +z (elevated); the +z face is visible, the -z face is not.
        let pose = views.pose(0);
        let front = Vec3::new(0.1, -0.1, 0.5);
        let back = Vec3::new(0.1, -0.1, -0.5);
        let i = project_point(&front, pose).unwrap().pixel(128, 128).map(|(x, y)| buffers[0].index(x, y)).unwrap();
        let center = buffers[0].point[i].map(f64::from);
        let center = Vec3::new(center[0], center[1], center[2]);
        assert!(visibility_test(&center, pose, &buffers[0].depth, 0.001));
        assert!(visible_pixel(&front, pose, &buffers[0], &mesh, &adj, 0.001, DepthLookup::LocalRayCast).is_some());
        for lookup in [DepthLookup::NearestPixel, DepthLookup::LocalRayCast] {
            assert!(visible_pixel(&back, pose, &buffers[0], &mesh, &adj, 0.001, lookup).is_none());
        }
        assert!(!visibility_test(&back, pose, &buffers[0].depth, 0.001));
    }

    #[test]
    fn oracle_round_trip_on_convex_solid() {
        let mesh = synth::subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 6);
        let gt = synth::box_side_labels(&mesh);
        let views = canonical_views(&ViewConfig::default().with_image_size(256)).unwrap();
        let buffers = render_views(&mesh, &views);
        let gt = PartLabeling::for_faces(&mesh, gt).unwrap();
        let masks = oracle_masks(&mesh, &gt, &buffers).unwrap();
        let lifted = lift_masks(&mesh, &views, &buffers, &masks, &LiftConfig::default()).unwrap();
        assert_eq!(lifted.labels, gt.labels);
        // Re-rendering the lifted labels is a fixed point.
        let again = oracle_masks(&mesh, &lifted, &buffers).unwrap();
        assert_eq!(again, masks);
    }

    #[test]
    fn background_masks_lift_to_unlabeled() {
        let mesh = synth::icosphere(1, 0.5);
        let views = canonical_views(&ViewConfig::default().with_image_size(64)).unwrap();
        let buffers = render_views(&mesh, &views);
        let masks = MaskSet::empty(64, 64, 12);
        let lifted = lift_masks(&mesh, &views, &buffers, &masks, &LiftConfig::default()).unwrap();
        assert!(lifted.labels.iter().all(|&l| l == -1));
    }

    #[test]
    fn majority_beats_one_adversarial_view() {
        let mesh = synth::icosphere(2, 0.5);
        let views = canonical_views(&ViewConfig::default().with_image_size(128)).unwrap();
        let buffers = render_views(&mesh, &views);
        let gt = PartLabeling::for_faces(&mesh, vec![0; mesh.face_count()]).unwrap();
        let mut masks = oracle_masks(&mesh, &gt, &buffers).unwrap();
        for l in masks.views[4].iter_mut().filter(|l| **l >= 0) {
            *l = 9;
        }
        let cfg = LiftConfig::default();
        // A point seen by view 4 and several others.
        let face = buffers[4].face_at(64, 64).unwrap() as usize;
        let p = mesh.face_centroid(face);
        let votes = point_votes(&p, None, &mesh, &FaceAdjacency::edge(&mesh), &views, &buffers, &masks, &cfg);
        assert!(votes.contains(&9) && votes.iter().filter(|&&v| v == 0).count() >= 2, "{votes:?}");
        let out = lift_to_points(&[p], &mesh, &views, &buffers, &masks, &cfg).unwrap();
        assert_eq!(out.labels, vec![0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mesh = synth::unit_cube();
        let views = canonical_views(&ViewConfig::default().with_image_size(32)).unwrap();
        let buffers = render_views(&mesh, &views);
        let masks = MaskSet::empty(16, 16, 12);
        assert!(matches!(
            lift_masks(&mesh, &views, &buffers, &masks, &LiftConfig::default()),
            Err(LiftError::Dimension { .. })
        ));
        let masks = MaskSet::empty(32, 32, 11);
        assert!(matches!(
            lift_masks(&mesh, &views, &buffers, &masks, &LiftConfig::default()),
            Err(LiftError::ViewCount { .. })
        ));
    }
}
