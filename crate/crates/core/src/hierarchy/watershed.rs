//! Watershed hierarchy by area on an edge-weighted pixel graph.
//!
//! The graph is flooded along its minimum spanning tree (Kruskal order).
//! Whenever two trees that each hold a regional minimum meet, the one with
//! the smaller area goes extinct and the MST edge is re-weighted with that
//! area. Edges that never separate two minima get weight zero; their
//! connected pieces are the watershed basins, i.e. the dendrogram leaves.
//! The dendrogram is the canonical binary partition tree of the re-weighted
//! MST, with equal-altitude merges fused into a single node.

use super::graph::PixelGraph;
use super::union_find::DisjointSet;

#[derive(Clone, Debug)]
pub struct RegionDendrogram {
    num_leaves: usize,
    /// Root points to itself. Children always precede their parent.
    parent: Vec<u32>,
    altitude: Vec<f64>,
    area: Vec<usize>,
    children: Vec<Vec<u32>>,
    /// Leaf of each graph vertex.
    basin: Vec<u32>,
}

impl RegionDendrogram {
    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn root(&self) -> u32 {
        (self.num_nodes() - 1) as u32
    }

    pub fn is_leaf(&self, n: u32) -> bool {
        (n as usize) < self.num_leaves
    }

    pub fn parent(&self, n: u32) -> Option<u32> {
        let p = self.parent[n as usize];
        (p != n).then_some(p)
    }

    pub fn children(&self, n: u32) -> &[u32] {
        &self.children[n as usize]
    }

    pub fn altitude(&self, n: u32) -> f64 {
        self.altitude[n as usize]
    }

    pub fn area(&self, n: u32) -> usize {
        self.area[n as usize]
    }

    /// Leaf (basin) holding a graph vertex.
    pub fn basin_of(&self, vertex: u32) -> u32 {
        self.basin[vertex as usize]
    }

    pub fn basins(&self) -> &[u32] {
        &self.basin
    }

    pub fn is_ancestor(&self, ancestor: u32, mut n: u32) -> bool {
        while let Some(p) = self.parent(n) {
            if p == ancestor {
                return true;
            }
            n = p;
        }
        false
    }

    pub fn lowest_common_ancestor(&self, a: u32, b: u32) -> u32 {
        // children precede parents, so the smaller id is never above the larger
        let (mut a, mut b) = (a, b);
        while a != b {
            if a < b {
                a = self.parent[a as usize];
            } else {
                b = self.parent[b as usize];
            }
        }
        a
    }

    /// Leaves below `n`, ascending.
    pub fn leaves_under(&self, n: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            if self.is_leaf(x) {
                out.push(x);
            } else {
                stack.extend_from_slice(&self.children[x as usize]);
            }
        }
        out.sort_unstable();
        out
    }

    /// Region id per vertex for the horizontal cut keeping every merge with
    /// altitude at most `level`.
    pub fn cut(&self, level: f64) -> Vec<u32> {
        let n = self.num_nodes();
        let mut top: Vec<u32> = (0..n as u32).collect();
        for x in (0..n).rev() {
            let p = self.parent[x] as usize;
            if p != x && self.altitude[p] <= level {
                top[x] = top[p];
            }
        }
        self.basin.iter().map(|&b| top[b as usize]).collect()
    }

    pub fn region_count(&self, level: f64) -> usize {
        let mut regions = self.cut(level);
        regions.sort_unstable();
        regions.dedup();
        regions.len()
    }

    /// Distinct merge altitudes, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let mut l: Vec<f64> = self.altitude[self.num_leaves..].to_vec();
        l.sort_by(f64::total_cmp);
        l.dedup();
        l
    }
}

/// Regional minima of the vertex values: plateaus with no strictly lower
/// neighbor. Ids follow the lowest vertex of each plateau.
pub(crate) fn regional_minima(graph: &PixelGraph, adj: &[Vec<u32>]) -> Vec<Option<u32>> {
    let n = graph.num_vertices();
    let mut plateau = vec![u32::MAX; n];
    let mut minima = vec![None; n];
    let mut next_id = 0u32;
    let mut members = Vec::new();
    for start in 0..n {
        if plateau[start] != u32::MAX {
            continue;
        }
        let v0 = graph.values[start];
        members.clear();
        members.push(start as u32);
        plateau[start] = start as u32;
        let mut is_min = true;
        let mut i = 0;
        while i < members.len() {
            let u = members[i] as usize;
            i += 1;
            for &w in &adj[u] {
                let vw = graph.values[w as usize];
                if vw < v0 {
                    is_min = false;
                } else if vw == v0 && plateau[w as usize] == u32::MAX {
                    plateau[w as usize] = start as u32;
                    members.push(w);
                }
            }
        }
        if is_min {
            for &m in &members {
                minima[m as usize] = Some(next_id);
            }
            next_id += 1;
        }
    }
    minima
}

pub fn watershed_by_area(graph: &PixelGraph) -> RegionDendrogram {
    let n = graph.num_vertices();
    assert!(n > 0, "watershed of an empty graph");
    let adj = graph.adjacency();
    let minima = regional_minima(graph, &adj);

    let mut order: Vec<u32> = (0..graph.num_edges() as u32).collect();
    order.sort_by(|&a, &b| {
        graph.weights[a as usize]
            .total_cmp(&graph.weights[b as usize])
            .then(a.cmp(&b))
    });

    // flood along Kruskal order, re-weighting MST edges by area extinction
    let mut uf = DisjointSet::new(n);
    let mut area = vec![1usize; n];
    let mut dominant = minima.clone();
    let mut basin_links = DisjointSet::new(n);
    let mut separating: Vec<(f64, usize, u32, u32)> = Vec::new();
    for (rank, &e) in order.iter().enumerate() {
        let (u, v) = graph.edges[e as usize];
        let (ru, rv) = (uf.find(u), uf.find(v));
        if ru == rv {
            continue;
        }
        let (au, av) = (area[ru as usize], area[rv as usize]);
        let (du, dv) = (dominant[ru as usize], dominant[rv as usize]);
        let merged_dom = match (du, dv) {
            (Some(a), Some(b)) if a != b => {
                // smaller area dies; on equal areas the lower minimum id survives
                let u_survives = au > av || (au == av && a < b);
                let extinction = if u_survives { av } else { au };
                separating.push((extinction as f64, rank, u, v));
                Some(if u_survives { a } else { b })
            }
            _ => {
                basin_links.union(u, v);
                du.or(dv)
            }
        };
        let root = uf.union(ru, rv).expect("distinct roots");
        area[root as usize] = au + av;
        dominant[root as usize] = merged_dom;
    }

    // leaves: basins numbered by their lowest vertex
    let mut leaf_of_root = vec![u32::MAX; n];
    let mut basin = vec![0u32; n];
    let mut leaf_area = Vec::new();
    for v in 0..n as u32 {
        let r = basin_links.find(v) as usize;
        if leaf_of_root[r] == u32::MAX {
            leaf_of_root[r] = leaf_area.len() as u32;
            leaf_area.push(0usize);
        }
        basin[v as usize] = leaf_of_root[r];
        leaf_area[leaf_of_root[r] as usize] += 1;
    }
    let num_leaves = leaf_area.len();

    // binary partition tree over the basins
    separating.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut bin_parent: Vec<u32> = (0..num_leaves as u32).collect();
    let mut bin_alt = vec![0.0f64; num_leaves];
    let mut leaf_uf = DisjointSet::new(num_leaves);
    let mut node_of_root: Vec<u32> = (0..num_leaves as u32).collect();
    for &(w, _, u, v) in &separating {
        let (lu, lv) = (basin[u as usize], basin[v as usize]);
        let (ru, rv) = (leaf_uf.find(lu), leaf_uf.find(lv));
        debug_assert_ne!(ru, rv, "separating edges are MST edges");
        let (nu, nv) = (node_of_root[ru as usize], node_of_root[rv as usize]);
        let id = bin_parent.len() as u32;
        bin_parent.push(id);
        bin_alt.push(w);
        bin_parent[nu as usize] = id;
        bin_parent[nv as usize] = id;
        let r = leaf_uf.union(ru, rv).expect("distinct roots");
        node_of_root[r as usize] = id;
    }

    // canonical form: fuse internal nodes into an equal-altitude parent
    let total = bin_parent.len();
    let mut rep: Vec<u32> = (0..total as u32).collect();
    for x in (num_leaves..total).rev() {
        let p = bin_parent[x] as usize;
        if p != x && bin_alt[p] == bin_alt[x] {
            rep[x] = rep[p];
        }
    }
    let mut new_id = vec![u32::MAX; total];
    let mut kept = Vec::new();
    for x in 0..total {
        if rep[x] == x as u32 {
            new_id[x] = kept.len() as u32;
            kept.push(x);
        }
    }
    let mut parent = Vec::with_capacity(kept.len());
    let mut altitude = Vec::with_capacity(kept.len());
    for &x in &kept {
        let p = bin_parent[x] as usize;
        parent.push(if p == x { new_id[x] } else { new_id[rep[p] as usize] });
        altitude.push(bin_alt[x]);
    }
    let mut children = vec![Vec::new(); kept.len()];
    let mut node_area = vec![0usize; kept.len()];
    node_area[..num_leaves].copy_from_slice(&leaf_area);
    for x in 0..kept.len() {
        let p = parent[x] as usize;
        if p != x {
            children[p].push(x as u32);
            node_area[p] += node_area[x];
        }
    }
    RegionDendrogram {
        num_leaves,
        parent,
        altitude,
        area: node_area,
        children,
        basin,
    }
}
