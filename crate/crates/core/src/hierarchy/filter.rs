use super::graph::PixelGraph;
use super::watershed::RegionDendrogram;
use crate::error::{Error, Result};
use crate::grid::Shape;

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyParams {
    pub min_size: usize,
    pub max_size: usize,
    /// Children of a node whose separating frontier is weaker than this are removed.
    pub strength_threshold: f64,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        Self {
            min_size: 20,
            max_size: 5000,
            strength_threshold: 0.0,
        }
    }
}

impl HierarchyParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.min_size > self.max_size {
            problems.push(format!("min_size ({}) > max_size ({})", self.min_size, self.max_size));
        }
        if !(0.0..=1.0).contains(&self.strength_threshold) {
            problems.push(format!("strength_threshold ({}) outside [0, 1]", self.strength_threshold));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParam(problems.join("; ")))
        }
    }
}

/// One candidate region, stored as a mask cropped to its bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSegment {
    /// Index within its frame.
    pub id: u32,
    pub frame: usize,
    /// Component (1-based label) and dendrogram node it came from.
    pub component: u32,
    pub node: u32,
    /// Inclusive lower and exclusive upper corner, `[z, y, x]`.
    pub bbox_lo: [usize; 3],
    pub bbox_hi: [usize; 3],
    /// Row-major mask over the bounding box.
    pub mask: Vec<bool>,
    pub area: usize,
    /// Mean `[z, y, x]` of the pixels.
    pub centroid: [f64; 3],
    /// Mean contour value on the frontier between the node's children;
    /// `None` for dendrogram leaves.
    pub frontier_strength: Option<f64>,
    /// Lowest global pixel index, used for stable ordering.
    pub first_pixel: usize,
}

impl CandidateSegment {
    pub fn from_pixels(shape: &Shape, pixels: &[usize]) -> Self {
        assert!(!pixels.is_empty(), "candidate without pixels");
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut sum = [0.0f64; 3];
        for &p in pixels {
            let c = shape.coords(p);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a] + 1);
                sum[a] += c[a] as f64;
            }
        }
        let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let mut mask = vec![false; ext[0] * ext[1] * ext[2]];
        for &p in pixels {
            let c = shape.coords(p);
            mask[((c[0] - lo[0]) * ext[1] + (c[1] - lo[1])) * ext[2] + (c[2] - lo[2])] = true;
        }
        let n = pixels.len() as f64;
        CandidateSegment {
            id: 0,
            frame: 0,
            component: 0,
            node: 0,
            bbox_lo: lo,
            bbox_hi: hi,
            mask,
            area: pixels.len(),
            centroid: [sum[0] / n, sum[1] / n, sum[2] / n],
            frontier_strength: None,
            first_pixel: pixels.iter().copied().min().unwrap(),
        }
    }

    pub fn extent(&self) -> [usize; 3] {
        [
            self.bbox_hi[0] - self.bbox_lo[0],
            self.bbox_hi[1] - self.bbox_lo[1],
            self.bbox_hi[2] - self.bbox_lo[2],
        ]
    }

    pub fn contains(&self, c: [usize; 3]) -> bool {
        if (0..3).any(|a| c[a] < self.bbox_lo[a] || c[a] >= self.bbox_hi[a]) {
            return false;
        }
        let e = self.extent();
        self.mask[((c[0] - self.bbox_lo[0]) * e[1] + (c[1] - self.bbox_lo[1])) * e[2] + (c[2] - self.bbox_lo[2])]
    }

    /// Global pixel indices of the mask, ascending.
    pub fn pixels(&self, shape: &Shape) -> Vec<usize> {
        let e = self.extent();
        let mut out = Vec::with_capacity(self.area);
        for z in 0..e[0] {
            for y in 0..e[1] {
                for x in 0..e[2] {
                    if self.mask[(z * e[1] + y) * e[2] + x] {
                        out.push(shape.index([self.bbox_lo[0] + z, self.bbox_lo[1] + y, self.bbox_lo[2] + x]));
                    }
                }
            }
        }
        out
    }
}

/// Outcome of filtering one dendrogram.
#[derive(Clone, Debug)]
pub struct FilteredTree {
    /// Surviving nodes, children before parents.
    pub nodes: Vec<u32>,
    /// Nearest surviving ancestor of each surviving node, as an index into `nodes`.
    pub parent: Vec<Option<usize>>,
    /// Frontier strength per dendrogram node (`None` for leaves).
    pub frontier: Vec<Option<f64>>,
}

/// Mean edge weight between the children of every internal node.
pub fn frontier_strengths(dendrogram: &RegionDendrogram, graph: &PixelGraph) -> Vec<Option<f64>> {
    let n = dendrogram.num_nodes();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        let (a, b) = (dendrogram.basin_of(u), dendrogram.basin_of(v));
        if a != b {
            let l = dendrogram.lowest_common_ancestor(a, b) as usize;
            sum[l] += graph.weights[e];
            count[l] += 1;
        }
    }
    (0..n)
        .map(|i| (count[i] > 0).then(|| sum[i] / count[i] as f64))
        .collect()
}

/// Size filtering followed by removal of children behind weak frontiers.
pub fn filter_dendrogram(dendrogram: &RegionDendrogram, graph: &PixelGraph, params: &HierarchyParams) -> FilteredTree {
    let n = dendrogram.num_nodes();
    let frontier = frontier_strengths(dendrogram, graph);
    let mut alive: Vec<bool> = (0..n as u32)
        .map(|x| {
            let a = dendrogram.area(x);
            a >= params.min_size && a <= params.max_size
        })
        .collect();
    let size_alive = alive.clone();
    for x in 0..n as u32 {
        if !size_alive[x as usize] {
            continue;
        }
        if let Some(f) = frontier[x as usize] {
            if f < params.strength_threshold {
                for &c in dendrogram.children(x) {
                    alive[c as usize] = false;
                }
            }
        }
    }
    let nodes: Vec<u32> = (0..n as u32).filter(|&x| alive[x as usize]).collect();
    let mut position = vec![usize::MAX; n];
    for (i, &x) in nodes.iter().enumerate() {
        position[x as usize] = i;
    }
    let parent = nodes
        .iter()
        .map(|&x| {
            let mut cur = x;
            while let Some(p) = dendrogram.parent(cur) {
                if alive[p as usize] {
                    return Some(position[p as usize]);
                }
                cur = p;
            }
            None
        })
        .collect();
    FilteredTree { nodes, parent, frontier }
}

/// Graph vertices below each node, for the nodes listed.
pub(crate) fn node_vertices(dendrogram: &RegionDendrogram, nodes: &[u32]) -> Vec<Vec<u32>> {
    let mut by_leaf: Vec<Vec<u32>> = vec![Vec::new(); dendrogram.num_leaves()];
    for (v, &b) in dendrogram.basins().iter().enumerate() {
        by_leaf[b as usize].push(v as u32);
    }
    nodes
        .iter()
        .map(|&x| {
            let mut vs: Vec<u32> = dendrogram
                .leaves_under(x)
                .into_iter()
                .flat_map(|l| by_leaf[l as usize].iter().copied())
                .collect();
            vs.sort_unstable();
            vs
        })
        .collect()
}
