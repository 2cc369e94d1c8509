//! Connectivity-driven part decomposition used to curate part annotations.
//!
//! Starts from edge-connected components, merges the smallest parts until at
//! most `max_parts` remain, then splits components that only hold together
//! through thin bridge faces.

use std::collections::{BTreeSet, HashMap};

use super::topology::{label_components, FaceAdjacency};
use super::{AdjacencyKind, PartLabeling, TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeConfig {
    pub max_parts: usize,
    /// Single-linkage distance between face centroids, in normalized units.
    pub split_gap: f64,
    /// A split happens only if the bridge faces hold less than this fraction
    /// of the component's area.
    pub thin_area_frac: f64,
    /// Faces below this area percentile (within a component) are bridge candidates.
    pub bridge_percentile: f64,
    pub adjacency: AdjacencyKind,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            max_parts: 15,
            split_gap: 0.1,
            thin_area_frac: 0.02,
            bridge_percentile: 5.0,
            adjacency: AdjacencyKind::Edge,
        }
    }
}

struct Part {
    faces: Vec<usize>,
    area: f64,
    weighted_centroid: Vec3,
    plain_centroid_sum: Vec3,
    neighbors: BTreeSet<usize>,
}

impl Part {
    fn centroid(&self) -> Vec3 {
        if self.area > 0.0 {
            self.weighted_centroid / self.area
        } else {
            self.plain_centroid_sum / self.faces.len() as f64
        }
    }
}

pub fn decompose_parts(mesh: &TriMesh, config: &DecomposeConfig) -> PartLabeling {
    let adj = FaceAdjacency::build(mesh, config.adjacency);
    let components = label_components(&adj, |_, _| true);
    let centroids = mesh.face_centroids();
    let areas = mesh.face_areas();

    let n_comp = components.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut parts: Vec<Option<Part>> = (0..n_comp)
        .map(|_| {
            Some(Part {
                faces: Vec::new(),
                area: 0.0,
                weighted_centroid: Vec3::zeros(),
                plain_centroid_sum: Vec3::zeros(),
                neighbors: BTreeSet::new(),
            })
        })
        .collect();
    for (f, &c) in components.iter().enumerate() {
        let p = parts[c as usize].as_mut().unwrap();
        p.faces.push(f);
        p.area += areas[f];
        p.weighted_centroid += centroids[f] * areas[f];
        p.plain_centroid_sum += centroids[f];
    }
    // Edge adjacency between parts; always empty when components come from the
    // same adjacency, but populated for vertex-connected inputs after merging.
    let edge_adj = FaceAdjacency::edge(mesh);
    for f in 0..mesh.face_count() {
        let cf = components[f] as usize;
        for &g in edge_adj.neighbors(f) {
            let cg = components[g as usize] as usize;
            if cf != cg {
                parts[cf].as_mut().unwrap().neighbors.insert(cg);
            }
        }
    }

    let mut alive = n_comp;
    while alive > config.max_parts.max(1) {
        let (src, _) = parts
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (i, p.area)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("alive parts exist");
        let src_part = parts[src].take().unwrap();
        let c = src_part.centroid();
        let candidates: Vec<usize> = if src_part.neighbors.iter().any(|&n| parts[n].is_some()) {
            src_part
                .neighbors
                .iter()
                .copied()
                .filter(|&n| parts[n].is_some())
                .collect()
        } else {
            (0..parts.len()).filter(|&i| parts[i].is_some()).collect()
        };
        let dst = candidates
            .into_iter()
            .min_by(|&a, &b| {
                let da = (parts[a].as_ref().unwrap().centroid() - c).norm_squared();
                let db = (parts[b].as_ref().unwrap().centroid() - c).norm_squared();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("at least one other part");
        for &n in &src_part.neighbors {
            if let Some(p) = parts[n].as_mut() {
                p.neighbors.remove(&src);
                if n != dst {
                    p.neighbors.insert(dst);
                }
            }
        }
        let d = parts[dst].as_mut().unwrap();
        d.faces.extend(src_part.faces);
        d.area += src_part.area;
        d.weighted_centroid += src_part.weighted_centroid;
        d.plain_centroid_sum += src_part.plain_centroid_sum;
        d.neighbors.extend(src_part.neighbors.into_iter().filter(|&n| n != dst));
        d.neighbors.remove(&src);
        alive -= 1;
    }

    // Split inside original components only, so merged unions stay whole.
    let mut labels = vec![-1i32; mesh.face_count()];
    let mut next = 0;
    for part in parts.iter().flatten() {
        let mut by_component: HashMap<i32, Vec<usize>> = HashMap::new();
        for &f in &part.faces {
            by_component.entry(components[f]).or_default().push(f);
        }
        let mut keys: Vec<i32> = by_component.keys().copied().collect();
        keys.sort_unstable();
        let mut pieces: Vec<Vec<usize>> = Vec::new();
        for k in keys {
            let mut faces = by_component.remove(&k).unwrap();
            faces.sort_unstable();
            let mut clusters = split_thin_bridges(&faces, &adj, &centroids, areas, config);
            if pieces.is_empty() {
                pieces.push(clusters.remove(0));
            } else {
                pieces[0].extend(clusters.remove(0));
            }
            pieces.extend(clusters);
        }
        for piece in pieces {
            for f in piece {
                labels[f] = next;
            }
            next += 1;
        }
    }
    PartLabeling::for_faces(mesh, labels)
        .expect("one label per face")
        .compacted()
}

/// Splits one connected face set into spatial clusters when the only faces
/// joining them form a thin bridge. Returns at least one cluster.
fn split_thin_bridges(
    faces: &[usize],
    adj: &FaceAdjacency,
    centroids: &[Vec3],
    areas: &[f64],
    config: &DecomposeConfig,
) -> Vec<Vec<usize>> {
    if faces.len() < 2 {
        return vec![faces.to_vec()];
    }
    let mut sorted: Vec<f64> = faces.iter().map(|&f| areas[f]).collect();
    sorted.sort_by(f64::total_cmp);
    let rank = ((config.bridge_percentile / 100.0) * (sorted.len() - 1) as f64).floor() as usize;
    let threshold = sorted[rank.min(sorted.len() - 1)];
    let total_area: f64 = sorted.iter().sum();
    if total_area <= 0.0 {
        return vec![faces.to_vec()];
    }

    let (retained, excluded): (Vec<usize>, Vec<usize>) = faces
        .iter()
        .partition(|&&f| areas[f] >= threshold && areas[f] > 0.0);
    if retained.is_empty() {
        return vec![faces.to_vec()];
    }

    let gap = config.split_gap;
    let grid = CentroidGrid::new(&retained, centroids, gap);
    let local: HashMap<usize, usize> = retained.iter().enumerate().map(|(i, &f)| (f, i)).collect();

    // Single linkage over retained faces: linked by a shared edge or by
    // centroid distance within `gap`.
    let mut cluster = vec![usize::MAX; retained.len()];
    let mut n_clusters = 0;
    let mut stack = Vec::new();
    for start in 0..retained.len() {
        if cluster[start] != usize::MAX {
            continue;
        }
        cluster[start] = n_clusters;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let f = retained[i];
            let mut visit = |j: usize, stack: &mut Vec<usize>| {
                if cluster[j] == usize::MAX {
                    cluster[j] = n_clusters;
                    stack.push(j);
                }
            };
            for &g in adj.neighbors(f) {
                if let Some(&j) = local.get(&(g as usize)) {
                    visit(j, &mut stack);
                }
            }
            for j in grid.within(centroids[f], gap, centroids) {
                visit(j, &mut stack);
            }
        }
        n_clusters += 1;
    }
    if n_clusters < 2 {
        return vec![faces.to_vec()];
    }

    // Excluded faces near exactly one cluster belong to it; the rest bridge.
    let mut attached: Vec<(usize, usize)> = Vec::new();
    let mut bridge: Vec<usize> = Vec::new();
    for &f in &excluded {
        let near: BTreeSet<usize> = grid
            .within(centroids[f], gap, centroids)
            .map(|j| cluster[j])
            .chain(
                adj.neighbors(f)
                    .iter()
                    .filter_map(|g| local.get(&(*g as usize)).map(|&j| cluster[j])),
            )
            .collect();
        if near.len() == 1 {
            attached.push((f, *near.iter().next().unwrap()));
        } else {
            bridge.push(f);
        }
    }
    let bridge_area: f64 = bridge.iter().map(|&f| areas[f]).sum();
    if bridge_area / total_area >= config.thin_area_frac {
        return vec![faces.to_vec()];
    }

    let mut out = vec![Vec::new(); n_clusters];
    for (i, &f) in retained.iter().enumerate() {
        out[cluster[i]].push(f);
    }
    for (f, c) in attached {
        out[c].push(f);
    }
    for f in bridge {
        let nearest = retained
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (centroids[*a.1] - centroids[f]).norm_squared();
                let db = (centroids[*b.1] - centroids[f]).norm_squared();
                da.total_cmp(&db).then(a.1.cmp(b.1))
            })
            .map(|(i, _)| cluster[i])
            .unwrap();
        out[nearest].push(f);
    }
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort_by_key(|c| c[0]);
    out
}

/// Uniform hash grid over a subset of face centroids.
struct CentroidGrid {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    members: Vec<usize>,
}

impl CentroidGrid {
    fn new(members: &[usize], centroids: &[Vec3], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, &f) in members.iter().enumerate() {
            cells.entry(Self::key(centroids[f], cell)).or_default().push(i);
        }
        Self {
            cell,
            cells,
            members: members.to_vec(),
        }
    }

    fn key(p: Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Local indices of members whose centroid lies within `radius` of `p`.
    fn within<'a>(
        &'a self,
        p: Vec3,
        radius: f64,
        centroids: &'a [Vec3],
    ) -> impl Iterator<Item = usize> + 'a {
        let (kx, ky, kz) = Self::key(p, self.cell);
        let r2 = radius * radius;
        (-1..=1)
            .flat_map(move |dx| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dz| (dx, dy, dz))))
            .filter_map(move |(dx, dy, dz)| self.cells.get(&(kx + dx, ky + dy, kz + dz)))
            .flatten()
            .copied()
            .filter(move |&i| (centroids[self.members[i]] - p).norm_squared() <= r2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{connected_components, normalize_mesh};
    use crate::synth;

    #[test]
    fn below_threshold_is_unchanged() {
        let mesh = normalize_mesh(&synth::two_tetrahedra()).unwrap();
        let parts = decompose_parts(&mesh, &DecomposeConfig::default());
        let comps = connected_components(&mesh, AdjacencyKind::Edge);
        assert_eq!(parts.part_count(), 2);
        assert_eq!(parts.labels, comps.labels);
    }

    #[test]
    fn coarse_cube_is_not_split() {
        let mesh = synth::unit_cube();
        let parts = decompose_parts(&mesh, &DecomposeConfig::default());
        assert_eq!(parts.part_count(), 1);
    }
}
