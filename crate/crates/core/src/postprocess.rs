//! Clean-up of lifted face labels: small-component removal, optional
//! smoothing, and k-nearest-neighbor filling of whatever is left unlabeled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{label_components, FaceAdjacency, PartLabeling, TriMesh, UNLABELED};
use crate::spatial::KdTree;

pub const DEFAULT_MIN_FRACTION: f64 = 0.01;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("nothing to propagate: no face is labeled")]
    NothingToPropagate,
    #[error("labeling has {labels} elements for {faces} faces")]
    LabelCount { labels: usize, faces: usize },
}

/// What "small" is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeMeasure {
    /// Component area against `P` times the total surface area.
    #[default]
    Area,
    /// Component face count against `P` times the face count.
    FaceCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub min_fraction: f64,
    pub measure: SizeMeasure,
    pub smooth_iters: usize,
    pub k: usize,
    /// Skip the kNN fill and leave unlabeled faces as they are.
    pub fill: bool,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            min_fraction: DEFAULT_MIN_FRACTION,
            measure: SizeMeasure::Area,
            smooth_iters: 0,
            k: DEFAULT_K,
            fill: true,
        }
    }
}

fn check_len(labeling: &PartLabeling, mesh: &TriMesh) -> Result<(), PostprocessError> {
    if labeling.len() != mesh.face_count() {
        return Err(PostprocessError::LabelCount {
            labels: labeling.len(),
            faces: mesh.face_count(),
        });
    }
    Ok(())
}

/// Unlabels every component of same-label, edge-adjacent faces whose size is
/// strictly below `p` times the whole mesh.
pub fn remove_small_components(
    labeling: &PartLabeling,
    mesh: &TriMesh,
    adjacency: &FaceAdjacency,
    p: f64,
    measure: SizeMeasure,
) -> PartLabeling {
    let labels = &labeling.labels;
    let comps = label_components(adjacency, |a, b| labels[a] == labels[b]);
    let count = comps.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut size = vec![0.0; count];
    for (f, &c) in comps.iter().enumerate() {
        size[c as usize] += match measure {
            SizeMeasure::Area => mesh.face_areas()[f],
            SizeMeasure::FaceCount => 1.0,
        };
    }
    let total = match measure {
        SizeMeasure::Area => mesh.total_area(),
        SizeMeasure::FaceCount => mesh.face_count() as f64,
    };
    let threshold = p * total;
    let mut out = labeling.clone();
    for (f, &c) in comps.iter().enumerate() {
        if size[c as usize] < threshold {
            out.labels[f] = UNLABELED;
        }
    }
    out
}

/// Synchronous majority smoothing: a labeled face adopts a different label
/// held by more than half of its edge neighbors. Stops at a fixed point or
/// after `max_iters` rounds.
pub fn smooth_labels(labeling: &PartLabeling, adjacency: &FaceAdjacency, max_iters: usize) -> PartLabeling {
    let mut cur = labeling.labels.clone();
    for _ in 0..max_iters {
        let next: Vec<i32> = (0..cur.len())
            .into_par_iter()
            .map(|f| {
                let own = cur[f];
                let nbrs = adjacency.neighbors(f);
                if own < 0 || nbrs.is_empty() {
                    return own;
                }
                let mut labels: Vec<i32> = nbrs.iter().map(|&g| cur[g as usize]).collect();
                labels.sort_unstable();
                let mut i = 0;
                while i < labels.len() {
                    let j = labels[i..].iter().position(|&l| l != labels[i]).map_or(labels.len(), |d| i + d);
                    if labels[i] >= 0 && labels[i] != own && 2 * (j - i) > nbrs.len() {
                        return labels[i];
                    }
                    i = j;
                }
                own
            })
            .collect();
        if next == cur {
            break;
        }
        cur = next;
    }
    PartLabeling {
        labels: cur,
        ..labeling.clone()
    }
}

/// Plurality label among neighbors given nearest first; ties go to the label
/// whose closest member comes first.
pub fn plurality_nearest_first(labels: impl IntoIterator<Item = i32>) -> i32 {
    let mut counts: Vec<(i32, usize)> = Vec::new();
    for l in labels {
        match counts.iter_mut().find(|(x, _)| *x == l) {
            Some((_, c)) => *c += 1,
            None => counts.push((l, 1)),
        }
    }
    let mut best = (UNLABELED, 0);
    for (l, c) in counts {
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

/// Gives every unlabeled face the plurality label of its `k` nearest labeled
/// faces by centroid distance. Existing labels are kept.
pub fn knn_fill(labeling: &PartLabeling, mesh: &TriMesh, k: usize) -> Result<PartLabeling, PostprocessError> {
    check_len(labeling, mesh)?;
    let centroids = mesh.face_centroids();
    let labeled: Vec<usize> = (0..mesh.face_count()).filter(|&f| labeling.labels[f] >= 0).collect();
    if labeled.is_empty() {
        return Err(PostprocessError::NothingToPropagate);
    }
    let tree = KdTree::build(&labeled.iter().map(|&f| centroids[f]).collect::<Vec<_>>());
    let labels = (0..mesh.face_count())
        .into_par_iter()
        .map(|f| {
            let own = labeling.labels[f];
            if own >= 0 {
                return own;
            }
            let nn = tree.nearest(&centroids[f], k.max(1));
            plurality_nearest_first(nn.iter().map(|n| labeling.labels[labeled[n.index]]))
        })
        .collect();
    Ok(PartLabeling {
        labels,
        ..labeling.clone()
    })
}

/// Removal, optional smoothing, then (unless disabled) kNN fill.
pub fn postprocess(
    labeling: &PartLabeling,
    mesh: &TriMesh,
    adjacency: &FaceAdjacency,
    config: &PostprocessConfig,
) -> Result<PartLabeling, PostprocessError> {
    check_len(labeling, mesh)?;
    let cleaned = remove_small_components(labeling, mesh, adjacency, config.min_fraction, config.measure);
    let smoothed = smooth_labels(&cleaned, adjacency, config.smooth_iters);
    if !config.fill || smoothed.labels.iter().all(|&l| l >= 0) {
        return Ok(smoothed);
    }
    match knn_fill(&smoothed, mesh, config.k) {
        Err(PostprocessError::NothingToPropagate) => Ok(smoothed),
        other => other,
    }
}
