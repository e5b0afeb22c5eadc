use crate::grid::{ContourMap, Shape};

/// Edge-weighted lattice graph over one connected component.
///
/// Vertices are numbered locally in raster order of their pixel index; edge
/// weights are the mean contour value of the two endpoints.
#[derive(Clone, Debug)]
pub struct PixelGraph {
    /// Global pixel index per local vertex, ascending.
    pub pixels: Vec<usize>,
    /// Contour value per local vertex.
    pub values: Vec<f32>,
    pub edges: Vec<(u32, u32)>,
    pub weights: Vec<f64>,
}

impl PixelGraph {
    pub fn num_vertices(&self) -> usize {
        self.pixels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Local vertex of a global pixel, if it belongs to this graph.
    pub fn local(&self, pixel: usize) -> Option<u32> {
        self.pixels.binary_search(&pixel).ok().map(|i| i as u32)
    }

    pub(crate) fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.num_vertices()];
        for &(u, v) in &self.edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        adj
    }
}

/// Build the lattice graph of a component; `pixels` need not be sorted.
pub fn build_pixel_graph(shape: &Shape, pixels: &[usize], contour: &ContourMap) -> PixelGraph {
    let mut pixels = pixels.to_vec();
    pixels.sort_unstable();
    pixels.dedup();
    let values: Vec<f32> = pixels.iter().map(|&p| contour[p]).collect();
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (u, &p) in pixels.iter().enumerate() {
        for q in shape.forward_neighbors(p) {
            if let Ok(v) = pixels.binary_search(&q) {
                edges.push((u as u32, v as u32));
                // exact in f64 for f32 inputs
                weights.push(0.5 * (values[u] as f64 + values[v] as f64));
            }
        }
    }
    PixelGraph {
        pixels,
        values,
        edges,
        weights,
    }
}
