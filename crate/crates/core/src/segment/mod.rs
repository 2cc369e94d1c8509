//! Prompts, per-view mask sets, and the providers that turn one into the other.
//!
//! A provider maps a [`Prompt`] on one view to a [`MaskSet`] covering all
//! views. Three are built in: ground-truth rasterization ([`OracleProvider`]),
//! geometric region growing ([`RegionGrowProvider`]) and masks read from disk
//! ([`ExternalProvider`]), which is where a learned segmenter plugs in.

mod external;
mod grow;
mod opposite;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{PartLabeling, TriMesh, UNLABELED};
use crate::render::{RenderBuffers, EMPTY_FACE};
use crate::scene::Scene;

pub use external::{load_external_masks, mask_file_name, write_masks};
pub use grow::{grow_region, prompt_seeds, region_grow_segment, PromptSeeds, DEFAULT_ANGLE_THRESH_DEG};
pub use opposite::{auto_complete_opposite_view, AutoCompleteConfig};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("no surface under prompt: click ({u}, {v}) in view {view} hits background")]
    NoSurface { view: usize, u: f64, v: f64 },
    #[error("face {face} has no ground-truth label; the oracle needs every face labeled")]
    UnlabeledFace { face: usize },
    #[error("ground truth has {labels} labels for {faces} faces")]
    LabelCount { labels: usize, faces: usize },
    #[error("mask for view {view} is missing: {}", path.display())]
    MissingView { view: usize, path: PathBuf },
    #[error("mask for view {view} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    Dimension {
        view: usize,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("mask for view {view} must be 16-bit grayscale, found {found}")]
    PixelFormat { view: usize, found: String },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lift(#[from] crate::lift::LiftError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
}

/// A click or box prompt on one view. Coordinates are continuous image
/// coordinates; a click at `(u, v)` hits pixel `(floor(u), floor(v))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub view_index: usize,
    #[serde(default)]
    pub points: Vec<(f64, f64, Polarity)>,
    #[serde(default)]
    pub boxes: Vec<[f64; 4]>,
    pub segment_id: i32,
}

impl Prompt {
    pub fn click(view_index: usize, u: f64, v: f64, segment_id: i32) -> Self {
        Self {
            view_index,
            points: vec![(u, v, Polarity::Positive)],
            boxes: Vec::new(),
            segment_id,
        }
    }

    pub fn with_negative(mut self, u: f64, v: f64) -> Self {
        self.points.push((u, v, Polarity::Negative));
        self
    }

    pub fn with_box(mut self, b: [f64; 4]) -> Self {
        self.boxes.push(b);
        self
    }

    pub fn validate(&self, width: u32, height: u32, view_count: usize) -> Result<(), SegmentError> {
        let bad = |m: String| Err(SegmentError::InvalidPrompt(m));
        if self.view_index >= view_count {
            return bad(format!("view_index {} out of range 0..{}", self.view_index, view_count));
        }
        if self.points.is_empty() && self.boxes.is_empty() {
            return bad("prompt needs at least one point or box".into());
        }
        if self.segment_id < 0 {
            return bad(format!("segment_id {} must be non-negative", self.segment_id));
        }
        let (w, h) = (width as f64, height as f64);
        for &(u, v, _) in &self.points {
            if !(u >= 0.0 && u < w && v >= 0.0 && v < h) {
                return bad(format!("point ({u}, {v}) outside the {width}x{height} image"));
            }
        }
        for &[u0, v0, u1, v1] in &self.boxes {
            if !(u0 < u1 && v0 < v1) {
                return bad(format!("box [{u0}, {v0}, {u1}, {v1}] needs u0 < u1 and v0 < v1"));
            }
            if !(u0 >= 0.0 && v0 >= 0.0 && u1 <= w && v1 <= h) {
                return bad(format!("box [{u0}, {v0}, {u1}, {v1}] outside the {width}x{height} image"));
            }
        }
        Ok(())
    }
}

/// Per-view label rasters, row-major, `-1` for background or unlabeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    pub width: u32,
    pub height: u32,
    pub views: Vec<Vec<i32>>,
}

impl MaskSet {
    pub fn empty(width: u32, height: u32, view_count: usize) -> Self {
        Self {
            width,
            height,
            views: vec![vec![UNLABELED; width as usize * height as usize]; view_count],
        }
    }

    pub fn label(&self, view: usize, x: u32, y: u32) -> i32 {
        self.views[view][y as usize * self.width as usize + x as usize]
    }

    pub fn segment_ids(&self) -> BTreeSet<i32> {
        self.views.iter().flatten().copied().filter(|&l| l >= 0).collect()
    }

    pub fn labeled_count(&self, view: usize) -> usize {
        self.views[view].iter().filter(|&&l| l >= 0).count()
    }

    /// Copies every labeled pixel of `other` over `self`.
    pub fn overlay(&mut self, other: &MaskSet) {
        for (dst, src) in self.views.iter_mut().zip(&other.views) {
            for (d, &s) in dst.iter_mut().zip(src) {
                if s >= 0 {
                    *d = s;
                }
            }
        }
    }
}

/// Rasterizes per-face labels through each view's face-id map.
pub fn render_face_labels(buffers: &[RenderBuffers], face_labels: &[i32]) -> MaskSet {
    let (width, height) = buffers.first().map_or((0, 0), |b| (b.width, b.height));
    let views = buffers
        .par_iter()
        .map(|b| {
            b.face_id
                .iter()
                .map(|&f| if f != EMPTY_FACE { face_labels[f as usize] } else { UNLABELED })
                .collect()
        })
        .collect();
    MaskSet { width, height, views }
}

/// Ground-truth masks: every valid pixel carries the label of its face.
pub fn oracle_masks(mesh: &TriMesh, gt: &PartLabeling, buffers: &[RenderBuffers]) -> Result<MaskSet, SegmentError> {
    check_full_labels(mesh, &gt.labels)?;
    Ok(render_face_labels(buffers, &gt.labels))
}

fn check_full_labels(mesh: &TriMesh, labels: &[i32]) -> Result<(), SegmentError> {
    if labels.len() != mesh.face_count() {
        return Err(SegmentError::LabelCount {
            labels: labels.len(),
            faces: mesh.face_count(),
        });
    }
    match labels.iter().position(|&l| l < 0) {
        Some(face) => Err(SegmentError::UnlabeledFace { face }),
        None => Ok(()),
    }
}

/// Source of per-view masks for a prompt.
pub trait MaskProvider: Send + Sync {
    fn name(&self) -> &'static str;
    fn masks(&self, scene: &Scene, prompt: &Prompt) -> Result<MaskSet, SegmentError>;
}

/// An ideal segmenter: selects the whole ground-truth parts under the prompt
/// and renders them with the prompt's segment id.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    pub gt: Vec<i32>,
}

impl MaskProvider for OracleProvider {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn masks(&self, scene: &Scene, prompt: &Prompt) -> Result<MaskSet, SegmentError> {
        check_full_labels(&scene.mesh, &self.gt)?;
        let seeds = prompt_seeds(prompt, &scene.buffers)?;
        let excluded: BTreeSet<i32> = seeds.negative.iter().map(|&f| self.gt[f as usize]).collect();
        let parts: BTreeSet<i32> = seeds
            .positive
            .iter()
            .map(|&f| self.gt[f as usize])
            .filter(|p| !excluded.contains(p))
            .collect();
        let labels: Vec<i32> = self
            .gt
            .iter()
            .map(|l| if parts.contains(l) { prompt.segment_id } else { UNLABELED })
            .collect();
        Ok(render_face_labels(&scene.buffers, &labels))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegionGrowProvider {
    pub angle_thresh_deg: f64,
}

impl Default for RegionGrowProvider {
    fn default() -> Self {
        Self {
            angle_thresh_deg: DEFAULT_ANGLE_THRESH_DEG,
        }
    }
}

impl MaskProvider for RegionGrowProvider {
    fn name(&self) -> &'static str {
        "region_grow"
    }

    fn masks(&self, scene: &Scene, prompt: &Prompt) -> Result<MaskSet, SegmentError> {
        region_grow_segment(prompt, &scene.mesh, &scene.buffers, &scene.adjacency, self.angle_thresh_deg)
    }
}

/// Masks produced elsewhere and stored as `mask_XX.png` files. The prompt is
/// only validated; segment ids come from the files.
#[derive(Debug, Clone)]
pub struct ExternalProvider {
    pub dir: PathBuf,
}

impl MaskProvider for ExternalProvider {
    fn name(&self) -> &'static str {
        "external"
    }

    fn masks(&self, scene: &Scene, prompt: &Prompt) -> Result<MaskSet, SegmentError> {
        prompt.validate(scene.width(), scene.height(), scene.views.len())?;
        load_external_masks(&self.dir, &scene.views)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ViewConfig;
    use crate::synth;

    #[test]
    fn prompt_json_shape() {
        let json = r#"{"view_index":2,"points":[[10.5,20,"pos"],[3,4,"neg"]],"boxes":[[0,0,5,6]],"segment_id":1}"#;
        let p: Prompt = serde_json::from_str(json).unwrap();
        assert_eq!(p.points[1], (3.0, 4.0, Polarity::Negative));
        assert_eq!(p.boxes, vec![[0.0, 0.0, 5.0, 6.0]]);
        let back: Prompt = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn prompt_validation() {
        let ok = Prompt::click(0, 1.0, 1.0, 0);
        assert!(ok.validate(8, 8, 12).is_ok());
        let cases = [
            Prompt { points: vec![], ..ok.clone() },
            Prompt { view_index: 12, ..ok.clone() },
            Prompt::click(0, 8.0, 1.0, 0),
            Prompt::click(0, -0.1, 1.0, 0),
            Prompt::click(0, 1.0, 1.0, -1),
            ok.clone().with_box([3.0, 0.0, 2.0, 1.0]),
            ok.clone().with_box([0.0, 0.0, 9.0, 1.0]),
        ];
        for c in cases {
            assert!(matches!(c.validate(8, 8, 12), Err(SegmentError::InvalidPrompt(_))), "{c:?}");
        }
    }

    #[test]
    fn oracle_masks_partition_visible_parts() {
        let (mesh, labels) = synth::dumbbell();
        let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(96)).unwrap();
        let gt = PartLabeling::for_faces(&scene.mesh, labels).unwrap();
        let masks = oracle_masks(&scene.mesh, &gt, &scene.buffers).unwrap();
        for (view, buf) in scene.buffers.iter().enumerate() {
            for (i, &f) in buf.face_id.iter().enumerate() {
                let want = if buf.is_valid(i) { gt.labels[f as usize] } else { -1 };
                assert_eq!(masks.views[view][i], want);
            }
        }
        assert_eq!(masks.segment_ids(), [0, 1].into_iter().collect());
        let mut partial = gt.clone();
        partial.labels[3] = -1;
        assert!(matches!(
            oracle_masks(&scene.mesh, &partial, &scene.buffers),
            Err(SegmentError::UnlabeledFace { face: 3 })
        ));
    }

    #[test]
    fn oracle_provider_selects_clicked_part() {
        let (mesh, labels) = synth::dumbbell();
        let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(96)).unwrap();
        // View 3 looks from +x: the +x ball is in front at the image center.
        let buf = &scene.buffers[3];
        let face = buf.face_at(48, 48).unwrap() as usize;
        let provider = OracleProvider { gt: labels.clone() };
        let masks = provider.masks(&scene, &Prompt::click(3, 48.5, 48.5, 7)).unwrap();
        assert_eq!(masks.segment_ids(), [7].into_iter().collect());
        let part = labels[face];
        for (view, b) in scene.buffers.iter().enumerate() {
            for (i, &f) in b.face_id.iter().enumerate() {
                let want = b.is_valid(i) && labels[f as usize] == part;
                assert_eq!(masks.views[view][i] == 7, want);
            }
        }
    }

    #[test]
    fn overlay_keeps_background_of_other() {
        let mut a = MaskSet::empty(2, 1, 1);
        a.views[0] = vec![0, 1];
        let mut b = MaskSet::empty(2, 1, 1);
        b.views[0] = vec![-1, 4];
        a.overlay(&b);
        assert_eq!(a.views[0], vec![0, 4]);
    }
}
