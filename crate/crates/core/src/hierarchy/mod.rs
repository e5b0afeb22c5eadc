//! Per-frame region hierarchies and the candidate segments drawn from them.

mod components;
mod filter;
mod graph;
pub(crate) mod union_find;
mod watershed;

pub use components::{component_pixels, connected_components};
pub use filter::{filter_dendrogram, frontier_strengths, CandidateSegment, FilteredTree, HierarchyParams};
pub use graph::{build_pixel_graph, PixelGraph};
pub use watershed::{watershed_by_area, RegionDendrogram};

use crate::error::Result;
use crate::grid::{ensure_same_shape, ContourMap, ForegroundMask, Raster, Shape};

/// Candidate segments of one frame.
#[derive(Clone, Debug)]
pub struct FrameCandidates {
    pub frame: usize,
    pub shape: Shape,
    pub candidates: Vec<CandidateSegment>,
    /// Nearest enclosing candidate.
    pub parent: Vec<Option<u32>>,
    /// `(inner, outer)` for every pair where `outer` contains `inner`.
    pub exclusions: Vec<(u32, u32)>,
    pub warnings: Vec<String>,
}

impl FrameCandidates {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn empty(frame: usize, shape: Shape) -> Self {
        Self {
            frame,
            shape,
            candidates: Vec::new(),
            parent: Vec::new(),
            exclusions: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Ancestors of a candidate, nearest first.
    pub fn ancestors(&self, id: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(p) = self.parent[cur as usize] {
            out.push(p);
            cur = p;
        }
        out
    }
}

/// Build hierarchies for every foreground component of a frame and collect
/// the filtered candidates.
pub fn extract_frame_candidates(
    frame: usize,
    mask: &ForegroundMask,
    contour: &ContourMap,
    params: &HierarchyParams,
) -> Result<FrameCandidates> {
    params.validate()?;
    ensure_same_shape(mask.shape(), contour.shape(), "mask vs contour")?;
    let shape = mask.shape().clone();
    let labels = connected_components(mask);
    let mut out = FrameCandidates::empty(frame, shape.clone());
    for (ci, pixels) in component_pixels(&labels).iter().enumerate() {
        let component = ci as u32 + 1;
        let graph = build_pixel_graph(&shape, pixels, contour);
        let dendrogram = watershed_by_area(&graph);
        let filtered = filter_dendrogram(&dendrogram, &graph, params);
        if filtered.nodes.is_empty() {
            let msg = format!(
                "frame {frame}: component {component} ({} pixels) has no candidate after filtering",
                pixels.len()
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
            continue;
        }
        let offset = out.candidates.len() as u32;
        let vertex_sets = filter::node_vertices(&dendrogram, &filtered.nodes);
        for (i, (&node, verts)) in filtered.nodes.iter().zip(&vertex_sets).enumerate() {
            let px: Vec<usize> = verts.iter().map(|&v| graph.pixels[v as usize]).collect();
            let mut c = CandidateSegment::from_pixels(&shape, &px);
            c.id = offset + i as u32;
            c.frame = frame;
            c.component = component;
            c.node = node;
            c.frontier_strength = filtered.frontier[node as usize];
            out.candidates.push(c);
            out.parent.push(filtered.parent[i].map(|p| offset + p as u32));
        }
    }
    for id in 0..out.candidates.len() as u32 {
        for a in out.ancestors(id) {
            out.exclusions.push((id, a));
        }
    }
    Ok(out)
}

/// Per-pixel boundary saliency: the largest merge altitude on any edge
/// leaving the pixel inside its component.
pub fn saliency_map(mask: &ForegroundMask, contour: &ContourMap) -> Result<ContourMap> {
    ensure_same_shape(mask.shape(), contour.shape(), "mask vs contour")?;
    let shape = mask.shape().clone();
    let mut out = Raster::filled(shape.clone(), 0.0f32);
    let labels = connected_components(mask);
    for pixels in component_pixels(&labels) {
        let graph = build_pixel_graph(&shape, &pixels, contour);
        let d = watershed_by_area(&graph);
        for &(u, v) in &graph.edges {
            let (a, b) = (d.basin_of(u), d.basin_of(v));
            if a == b {
                continue;
            }
            let s = d.altitude(d.lowest_common_ancestor(a, b)) as f32;
            for w in [u, v] {
                let p = graph.pixels[w as usize];
                out[p] = out[p].max(s);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_frame(rng: &mut impl Rng) -> (ForegroundMask, ContourMap) {
        let s = Shape::d2(rng.random_range(1..10), rng.random_range(1..10));
        let m = Raster::from_vec(s.clone(), (0..s.len()).map(|_| rng.random_bool(0.8)).collect()).unwrap();
        let c = Raster::from_vec(s.clone(), (0..s.len()).map(|_| rng.random_range(0..8) as f32 / 7.0).collect())
            .unwrap();
        (m, c)
    }

    #[test]
    fn exclusions_match_mask_containment() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (m, c) = random_frame(&mut rng);
            let params = HierarchyParams {
                min_size: rng.random_range(1..4),
                max_size: rng.random_range(4..60),
                strength_threshold: rng.random_range(0.0..0.5),
            };
            let fc = extract_frame_candidates(0, &m, &c, &params).unwrap();
            let sets: Vec<Vec<usize>> = fc.candidates.iter().map(|c| c.pixels(&fc.shape)).collect();
            let mut expected = Vec::new();
            for (i, a) in sets.iter().enumerate() {
                assert!(a.len() >= params.min_size && a.len() <= params.max_size);
                assert_eq!(a.len(), fc.candidates[i].area);
                for (j, b) in sets.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let inter = a.iter().filter(|p| b.binary_search(p).is_ok()).count();
                    // nested or disjoint
                    assert!(inter == 0 || inter == a.len() || inter == b.len());
                    if inter == a.len() {
                        assert!(a.len() < b.len());
                        expected.push((i as u32, j as u32));
                    }
                }
            }
            let mut got = fc.exclusions.clone();
            got.sort();
            expected.sort();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn fully_filtered_component_warns() {
        let s = Shape::d2(1, 5);
        let m = Raster::from_vec(s.clone(), vec![true, false, true, true, true]).unwrap();
        let c = Raster::filled(s, 0.0f32);
        let params = HierarchyParams {
            min_size: 2,
            max_size: 10,
            strength_threshold: 0.0,
        };
        let fc = extract_frame_candidates(4, &m, &c, &params).unwrap();
        assert_eq!(fc.len(), 1);
        assert_eq!(fc.candidates[0].area, 3);
        assert_eq!(fc.candidates[0].frame, 4);
        assert_eq!(fc.warnings.len(), 1);
    }

    #[test]
    fn saliency_marks_ridge() {
        let s = Shape::d1(4);
        let m = Raster::filled(s.clone(), true);
        let c = Raster::from_vec(s, vec![0.0f32, 0.0, 1.0, 0.4]).unwrap();
        let sal = saliency_map(&m, &c).unwrap();
        assert_eq!(sal.data(), &[0.0, 0.0, 1.0, 1.0]);
    }
}
