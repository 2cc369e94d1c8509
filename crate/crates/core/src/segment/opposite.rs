use std::collections::HashMap;

use super::{MaskSet, SegmentError};
use crate::lift::{lift_masks, LiftConfig};
use crate::mesh::{FaceAdjacency, TriMesh};
use crate::render::{RenderBuffers, ViewSet, EMPTY_FACE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoCompleteConfig {
    pub angle_thresh_deg: f64,
    /// Unlabeled pixel components smaller than this are left alone.
    pub min_pixels: usize,
    pub lift: LiftConfig,
}

impl Default for AutoCompleteConfig {
    fn default() -> Self {
        Self {
            angle_thresh_deg: super::DEFAULT_ANGLE_THRESH_DEG,
            min_pixels: 16,
            lift: LiftConfig::default(),
        }
    }
}

/// 4-connected components of `mask[i]`, largest first (ties by first pixel).
fn pixel_components(width: usize, height: usize, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let i = comp[k];
            k += 1;
            let (x, y) = (i % width, i / width);
            let mut push = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < width {
                push(i + 1);
            }
            if y > 0 {
                push(i - width);
            }
            if y + 1 < height {
                push(i + width);
            }
        }
        out.push(comp);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Fills the unlabeled area of the view opposite `source_view`.
///
/// The current masks are lifted to faces. Each sufficiently large component of
/// opposite-view pixels whose face is still unlabeled seeds a region grown
/// over unlabeled faces from its most frequent face; every region gets a fresh
/// segment id and is rendered into all views, only over pixels that were `-1`.
pub fn auto_complete_opposite_view(
    masks: &MaskSet,
    source_view: usize,
    mesh: &TriMesh,
    views: &ViewSet,
    buffers: &[RenderBuffers],
    adjacency: &FaceAdjacency,
    config: &AutoCompleteConfig,
) -> Result<MaskSet, SegmentError> {
    let lifted = lift_masks(mesh, views, buffers, masks, &config.lift)?;
    let target = views.opposite(source_view);
    let buf = &buffers[target];
    let raster = &masks.views[target];
    let candidate: Vec<bool> = buf
        .face_id
        .iter()
        .zip(raster)
        .map(|(&f, &l)| f != EMPTY_FACE && l < 0 && lifted.labels[f as usize] < 0)
        .collect();
    let mut next_id = masks.segment_ids().last().map_or(0, |m| m + 1);
    let mut claimed: Vec<i32> = vec![-1; mesh.face_count()];
    let free = |f: usize, claimed: &[i32]| lifted.labels[f] < 0 && claimed[f] < 0 && !mesh.is_degenerate(f);
    let thresh = config.angle_thresh_deg;
    for comp in pixel_components(buf.width as usize, buf.height as usize, &candidate) {
        if comp.len() < config.min_pixels {
            break;
        }
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for &i in &comp {
            let f = buf.face_id[i];
            if free(f as usize, &claimed) {
                *counts.entry(f).or_default() += 1;
            }
        }
        let Some(seed) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&f, _)| f as usize) else {
            continue;
        };
        let id = next_id;
        next_id += 1;
        claimed[seed] = id;
        let mut stack = vec![seed];
        while let Some(f) = stack.pop() {
            for &g in adjacency.neighbors(f) {
                let g = g as usize;
                if free(g, &claimed) {
                    let c = mesh.face_normals()[f].dot(&mesh.face_normals()[g]).clamp(-1.0, 1.0);
                    if c.acos().to_degrees() < thresh {
                        claimed[g] = id;
                        stack.push(g);
                    }
                }
            }
        }
    }
    let mut out = masks.clone();
    for (b, raster) in buffers.iter().zip(out.views.iter_mut()) {
        for (l, &f) in raster.iter_mut().zip(&b.face_id) {
            if *l < 0 && f != EMPTY_FACE && claimed[f as usize] >= 0 {
                *l = claimed[f as usize];
            }
        }
    }
    Ok(out)
}
