use std::collections::BTreeSet;

use super::{render_face_labels, MaskSet, Polarity, Prompt, SegmentError};
use crate::mesh::{FaceAdjacency, TriMesh, UNLABELED};
use crate::render::RenderBuffers;

pub const DEFAULT_ANGLE_THRESH_DEG: f64 = 30.0;

/// Faces picked out by a prompt on its view.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromptSeeds {
    pub positive: Vec<u32>,
    pub negative: Vec<u32>,
}

/// Resolves clicks and boxes to faces through the prompted view's face-id map.
///
/// With boxes and positive clicks, the seeds are the clicked faces whose
/// footprint meets a box; with boxes alone, every face in the boxes. Negative
/// clicks on background are ignored.
pub fn prompt_seeds(prompt: &Prompt, buffers: &[RenderBuffers]) -> Result<PromptSeeds, SegmentError> {
    let buf = buffers
        .get(prompt.view_index)
        .ok_or_else(|| SegmentError::InvalidPrompt(format!("view_index {} out of range", prompt.view_index)))?;
    prompt.validate(buf.width, buf.height, buffers.len())?;
    let mut positive = BTreeSet::new();
    let mut negative = BTreeSet::new();
    for &(u, v, polarity) in &prompt.points {
        let face = buf.face_at(u.floor() as u32, v.floor() as u32);
        match (polarity, face) {
            (Polarity::Positive, Some(f)) => {
                positive.insert(f);
            }
            (Polarity::Positive, None) => {
                return Err(SegmentError::NoSurface {
                    view: prompt.view_index,
                    u,
                    v,
                })
            }
            (Polarity::Negative, Some(f)) => {
                negative.insert(f);
            }
            (Polarity::Negative, None) => {}
        }
    }
    if !prompt.boxes.is_empty() {
        let mut footprint = BTreeSet::new();
        for &[u0, v0, u1, v1] in &prompt.boxes {
            let (x0, x1) = (u0.floor() as u32, (u1.ceil() as u32).min(buf.width));
            let (y0, y1) = (v0.floor() as u32, (v1.ceil() as u32).min(buf.height));
            for y in y0..y1 {
                for x in x0..x1 {
                    if let Some(f) = buf.face_at(x, y) {
                        footprint.insert(f);
                    }
                }
            }
        }
        if positive.is_empty() {
            positive = footprint;
        } else {
            positive.retain(|f| footprint.contains(f));
        }
        if positive.is_empty() {
            let [u0, v0, ..] = prompt.boxes[0];
            return Err(SegmentError::NoSurface {
                view: prompt.view_index,
                u: u0,
                v: v0,
            });
        }
    }
    Ok(PromptSeeds {
        positive: positive.into_iter().collect(),
        negative: negative.into_iter().collect(),
    })
}

/// Whether growth may cross from face `a` to face `b`. Degenerate faces have
/// no normal and block growth.
fn crossable(mesh: &TriMesh, a: usize, b: usize, thresh_deg: f64) -> bool {
    if mesh.is_degenerate(a) || mesh.is_degenerate(b) {
        return false;
    }
    let c = mesh.face_normals()[a].dot(&mesh.face_normals()[b]).clamp(-1.0, 1.0);
    c.acos().to_degrees() < thresh_deg
}

/// Grows the positive seeds over edge-adjacent faces whose dihedral angle is
/// below `angle_thresh_deg`.
///
/// Negative seeds grow simultaneously under the same rule, one ring per round
/// and ahead of the positive front, so a face goes to whichever side reaches
/// it in fewer steps and to the negative side on ties.
pub fn grow_region(mesh: &TriMesh, adjacency: &FaceAdjacency, seeds: &PromptSeeds, angle_thresh_deg: f64) -> Vec<bool> {
    const FREE: u8 = 0;
    const POS: u8 = 1;
    const NEG: u8 = 2;
    let mut owner = vec![FREE; mesh.face_count()];
    let mut neg_front: Vec<usize> = Vec::new();
    for &f in &seeds.negative {
        owner[f as usize] = NEG;
        neg_front.push(f as usize);
    }
    let mut pos_front: Vec<usize> = Vec::new();
    for &f in &seeds.positive {
        if owner[f as usize] == FREE {
            owner[f as usize] = POS;
            pos_front.push(f as usize);
        }
    }
    let expand = |front: &[usize], side: u8, owner: &mut Vec<u8>| {
        let mut next = Vec::new();
        for &f in front {
            for &g in adjacency.neighbors(f) {
                let g = g as usize;
                if owner[g] == FREE && crossable(mesh, f, g, angle_thresh_deg) {
                    owner[g] = side;
                    next.push(g);
                }
            }
        }
        next
    };
    while !pos_front.is_empty() {
        neg_front = expand(&neg_front, NEG, &mut owner);
        pos_front = expand(&pos_front, POS, &mut owner);
    }
    owner.into_iter().map(|o| o == POS).collect()
}

/// Click-to-mask by region growing: the grown face set is rendered into every
/// view with the prompt's segment id.
pub fn region_grow_segment(
    prompt: &Prompt,
    mesh: &TriMesh,
    buffers: &[RenderBuffers],
    adjacency: &FaceAdjacency,
    angle_thresh_deg: f64,
) -> Result<MaskSet, SegmentError> {
    let seeds = prompt_seeds(prompt, buffers)?;
    let selected = grow_region(mesh, adjacency, &seeds, angle_thresh_deg);
    let labels: Vec<i32> = selected
        .iter()
        .map(|&s| if s { prompt.segment_id } else { UNLABELED })
        .collect();
    Ok(render_face_labels(buffers, &labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Vec3;
    use crate::render::ViewConfig;
    use crate::scene::Scene;
    use crate::synth;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    /// Plain BFS distances over crossable edges.
    fn distances(mesh: &TriMesh, adj: &FaceAdjacency, seeds: &[u32], thresh: f64) -> Vec<usize> {
        let mut d = vec![usize::MAX; mesh.face_count()];
        let mut q = VecDeque::new();
        for &s in seeds {
            d[s as usize] = 0;
            q.push_back(s as usize);
        }
        while let Some(f) = q.pop_front() {
            for &g in adj.neighbors(f) {
                let g = g as usize;
                if d[g] == usize::MAX && crossable(mesh, f, g, thresh) {
                    d[g] = d[f] + 1;
                    q.push_back(g);
                }
            }
        }
        d
    }

    fn cube_scene() -> Scene {
        let mesh = synth::subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 4);
        Scene::from_normalized(mesh, &ViewConfig::default().with_image_size(128)).unwrap()
    }

    #[test]
    fn cube_faces_are_selected_one_side_at_a_time() {
        let scene = cube_scene();
        let sides = synth::box_side_labels(&scene.mesh);
        let mut seen = BTreeSet::new();
        for view in 0..12 {
            for (x, y) in [(64, 40), (40, 90), (90, 90)] {
                let Some(face) = scene.buffers[view].face_at(x, y) else { continue };
                let p = Prompt::click(view, x as f64 + 0.5, y as f64 + 0.5, 0);
                let seeds = prompt_seeds(&p, &scene.buffers).unwrap();
                let sel = grow_region(&scene.mesh, &scene.adjacency, &seeds, 30.0);
                let side = sides[face as usize];
                for (f, &s) in sel.iter().enumerate() {
                    assert_eq!(s, sides[f] == side);
                }
                seen.insert(side);
            }
        }
        assert!(seen.len() >= 5, "{seen:?}");
    }

    #[test]
    fn sphere_saturates() {
        let scene = Scene::from_normalized(synth::icosphere(3, 0.5), &ViewConfig::default().with_image_size(64)).unwrap();
        let m = region_grow_segment(&Prompt::click(0, 32.0, 32.0, 2), &scene.mesh, &scene.buffers, &scene.adjacency, 30.0)
            .unwrap();
        for (buf, mask) in scene.buffers.iter().zip(&m.views) {
            for (i, &l) in mask.iter().enumerate() {
                assert_eq!(l == 2, buf.is_valid(i));
            }
        }
    }

    #[test]
    fn background_click_is_rejected() {
        let scene = cube_scene();
        let err = prompt_seeds(&Prompt::click(0, 1.0, 1.0, 0), &scene.buffers).unwrap_err();
        assert!(err.to_string().contains("no surface under prompt"), "{err}");
        assert!(err.to_string().contains("(1, 1)"), "{err}");
    }

    #[test]
    fn negative_click_carves_coplanar_strip() {
        let mesh = synth::flat_strip(12);
        let adj = FaceAdjacency::edge(&mesh);
        let seeds = PromptSeeds {
            positive: vec![0],
            negative: vec![14],
        };
        let sel = grow_region(&mesh, &adj, &seeds, 30.0);
        let dp = distances(&mesh, &adj, &seeds.positive, 30.0);
        let dn = distances(&mesh, &adj, &seeds.negative, 30.0);
        for f in 0..mesh.face_count() {
            assert_eq!(sel[f], dp[f] < dn[f], "face {f}");
        }
        assert!(sel[0] && !sel[14] && !sel[23]);
        assert!((0..24).filter(|&f| sel[f]).count() > 4);
    }

    #[test]
    fn box_only_prompt_seeds_from_footprint() {
        let scene = cube_scene();
        let p = Prompt {
            view_index: 0,
            points: vec![],
            boxes: vec![[60.0, 30.0, 68.0, 36.0]],
            segment_id: 3,
        };
        let seeds = prompt_seeds(&p, &scene.buffers).unwrap();
        assert!(!seeds.positive.is_empty());
        let outside = Prompt {
            boxes: vec![[0.0, 0.0, 2.0, 2.0]],
            ..p.clone()
        };
        assert!(matches!(prompt_seeds(&outside, &scene.buffers), Err(SegmentError::NoSurface { .. })));
        // A click outside the box leaves no seeds.
        let clipped = Prompt::click(0, 64.5, 90.5, 0).with_box([60.0, 30.0, 68.0, 36.0]);
        assert!(prompt_seeds(&clipped, &scene.buffers).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn growth_matches_distance_oracle_and_is_monotone(
            seed in 0u64..1000,
            t1 in 1.0f64..60.0,
            dt in 0.0f64..60.0,
            neg in proptest::option::of(0usize..80),
        ) {
            let mesh = synth::uv_sphere(10, 8, 0.5).map_vertices(|v| {
                Vec3::new(v.x * (1.0 + 0.3 * (seed as f64 * 0.01 + v.y * 7.0).sin()), v.y, v.z)
            });
            let adj = FaceAdjacency::edge(&mesh);
            let n = mesh.face_count();
            let pos = (seed as usize * 7) % n;
            let seeds = PromptSeeds { positive: vec![pos as u32], negative: neg.map(|f| vec![(f % n) as u32]).unwrap_or_default() };
            let a = grow_region(&mesh, &adj, &seeds, t1);
            let dp = distances(&mesh, &adj, &seeds.positive, t1);
            let dn = distances(&mesh, &adj, &seeds.negative, t1);
            for f in 0..n {
                prop_assert_eq!(a[f], dp[f] < dn[f]);
            }
            if seeds.negative.is_empty() {
                let b = grow_region(&mesh, &adj, &seeds, t1 + dt);
                for f in 0..n {
                    prop_assert!(!a[f] || b[f]);
                }
            }
            prop_assert_eq!(grow_region(&mesh, &adj, &seeds, t1), a);
        }
    }
}
