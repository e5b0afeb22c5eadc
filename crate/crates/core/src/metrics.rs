//! Segmentation (SEG), tracking (TRA) and combined (CTB) scores.
//!
//! A predicted instance matches a ground-truth instance when it covers more
//! than half of the ground-truth pixels. TRA is one minus the normalized
//! cost (AOGM) of the graph edits turning the predicted lineage into the
//! reference one.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::LabelImage;
use crate::tensor_io::TrackTable;

/// Edit weights of the acyclic oriented graph matching measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AogmWeights {
    pub split: f64,
    pub add_node: f64,
    pub delete_node: f64,
    pub delete_edge: f64,
    pub add_edge: f64,
    pub change_edge: f64,
}

impl Default for AogmWeights {
    fn default() -> Self {
        Self {
            split: 5.0,
            add_node: 10.0,
            delete_node: 1.0,
            delete_edge: 1.0,
            add_edge: 1.5,
            change_edge: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameCounts {
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreReport {
    pub seg: f64,
    pub tra: f64,
    pub ctb: f64,
    pub aogm: f64,
    pub aogm_empty: f64,
    pub splits: usize,
    pub missing_nodes: usize,
    pub spurious_nodes: usize,
    pub spurious_edges: usize,
    pub missing_edges: usize,
    pub wrong_edge_type: usize,
    pub per_frame: Vec<FrameCounts>,
}

impl ScoreReport {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seg={}", self.seg);
        let _ = writeln!(s, "tra={}", self.tra);
        let _ = writeln!(s, "ctb={}", self.ctb);
        let _ = writeln!(s, "aogm={}", self.aogm);
        let _ = writeln!(s, "aogm_empty={}", self.aogm_empty);
        let _ = writeln!(s, "splits={}", self.splits);
        let _ = writeln!(s, "missing_nodes={}", self.missing_nodes);
        let _ = writeln!(s, "spurious_nodes={}", self.spurious_nodes);
        let _ = writeln!(s, "spurious_edges={}", self.spurious_edges);
        let _ = writeln!(s, "missing_edges={}", self.missing_edges);
        let _ = writeln!(s, "wrong_edge_type={}", self.wrong_edge_type);
        for (t, c) in self.per_frame.iter().enumerate() {
            let _ = writeln!(s, "frame.{t}=matched:{} missed:{} spurious:{}", c.matched, c.missed, c.spurious);
        }
        s
    }
}

/// Label overlap of one frame: instance sizes and pairwise intersections.
struct Overlap {
    pred_size: HashMap<u32, usize>,
    gt_size: HashMap<u32, usize>,
    inter: HashMap<(u32, u32), usize>,
}

fn overlap(pred: &LabelImage, gt: &LabelImage) -> Overlap {
    let mut o = Overlap {
        pred_size: HashMap::new(),
        gt_size: HashMap::new(),
        inter: HashMap::new(),
    };
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if p != 0 {
            *o.pred_size.entry(p).or_default() += 1;
        }
        if g != 0 {
            *o.gt_size.entry(g).or_default() += 1;
        }
        if p != 0 && g != 0 {
            *o.inter.entry((p, g)).or_default() += 1;
        }
    }
    o
}

impl Overlap {
    /// Ground-truth label -> predicted label covering more than half of it.
    fn matches(&self) -> HashMap<u32, u32> {
        let mut m = HashMap::new();
        for (&(p, g), &n) in &self.inter {
            if 2 * n > self.gt_size[&g] {
                let prev = m.insert(g, p);
                assert!(prev.is_none(), "two predictions cover more than half of one instance");
            }
        }
        m
    }
}

fn check_frames(pred: &[LabelImage], gt: &[LabelImage]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("{} predicted frames vs {} reference frames", pred.len(), gt.len())));
    }
    for (t, (p, g)) in pred.iter().zip(gt).enumerate() {
        crate::grid::ensure_same_shape(p.shape(), g.shape(), &format!("frame {t}"))?;
    }
    Ok(())
}

/// Mean IoU of every reference instance with its match (0 when unmatched).
pub fn seg_score(pred: &[LabelImage], gt: &[LabelImage]) -> Result<f64> {
    check_frames(pred, gt)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut any_pred = false;
    for (p, g) in pred.iter().zip(gt) {
        let o = overlap(p, g);
        any_pred |= !o.pred_size.is_empty();
        let m = o.matches();
        for (&gl, &gs) in &o.gt_size {
            count += 1;
            if let Some(&pl) = m.get(&gl) {
                let inter = o.inter[&(pl, gl)];
                sum += inter as f64 / (o.pred_size[&pl] + gs - inter) as f64;
            }
        }
    }
    Ok(if count == 0 {
        if any_pred {
            0.0
        } else {
            1.0
        }
    } else {
        sum / count as f64
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum EdgeKind {
    Continue,
    Divide,
}

type Node = (usize, u32);

/// Temporal edges of a labeled lineage: same-label steps and parent-to-child links.
fn lineage_edges(labels: &[LabelImage], tracks: &TrackTable) -> HashMap<(Node, Node), EdgeKind> {
    let mut present: HashMap<u32, Vec<usize>> = HashMap::new();
    for (t, img) in labels.iter().enumerate() {
        let mut seen: Vec<u32> = img.data().iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        for l in seen {
            present.entry(l).or_default().push(t);
        }
    }
    let mut edges = HashMap::new();
    for (&l, frames) in &present {
        for w in frames.windows(2) {
            edges.insert(((w[0], l), (w[1], l)), EdgeKind::Continue);
        }
    }
    for r in &tracks.records {
        if r.parent == 0 {
            continue;
        }
        let (Some(pf), Some(cf)) = (present.get(&r.parent), present.get(&r.label)) else { continue };
        let (&last, &first) = (pf.last().unwrap(), cf.first().unwrap());
        if last < first {
            edges.insert(((last, r.parent), (first, r.label)), EdgeKind::Divide);
        }
    }
    edges
}

pub fn tra_score(
    pred: &[LabelImage],
    pred_tracks: &TrackTable,
    gt: &[LabelImage],
    gt_tracks: &TrackTable,
) -> Result<ScoreReport> {
    check_frames(pred, gt)?;
    let w = AogmWeights::default();
    let mut r = ScoreReport::default();
    // reference node -> predicted node
    let mut gt_to_pred: HashMap<Node, Node> = HashMap::new();
    let mut gt_nodes = 0usize;
    for (t, (p, g)) in pred.iter().zip(gt).enumerate() {
        let o = overlap(p, g);
        let m = o.matches();
        let mut hits: HashMap<u32, usize> = HashMap::new();
        for (&gl, &pl) in &m {
            gt_to_pred.insert((t, gl), (t, pl));
            *hits.entry(pl).or_default() += 1;
        }
        gt_nodes += o.gt_size.len();
        let counts = FrameCounts {
            matched: m.len(),
            missed: o.gt_size.len() - m.len(),
            spurious: o.pred_size.keys().filter(|pl| !hits.contains_key(pl)).count(),
        };
        r.splits += hits.values().map(|&k| k - 1).sum::<usize>();
        r.missing_nodes += counts.missed;
        r.spurious_nodes += counts.spurious;
        r.per_frame.push(counts);
    }

    let gt_edges = lineage_edges(gt, gt_tracks);
    let pred_edges = lineage_edges(pred, pred_tracks);
    // reference edges as seen through the matching, with their kinds
    let mut mapped: HashMap<(Node, Node), Vec<EdgeKind>> = HashMap::new();
    for (&(a, b), &kind) in &gt_edges {
        match (gt_to_pred.get(&a), gt_to_pred.get(&b)) {
            (Some(&pa), Some(&pb)) => mapped.entry((pa, pb)).or_default().push(kind),
            _ => r.missing_edges += 1,
        }
    }
    let mut used: HashSet<(Node, Node)> = HashSet::new();
    for (&e, &kind) in &pred_edges {
        match mapped.get(&e) {
            Some(kinds) => {
                used.insert(e);
                if !kinds.contains(&kind) {
                    r.wrong_edge_type += 1;
                }
            }
            None => r.spurious_edges += 1,
        }
    }
    for (e, kinds) in &mapped {
        if !used.contains(e) {
            r.missing_edges += kinds.len();
        } else if kinds.len() > 1 {
            // several reference edges collapse onto one predicted edge
            r.missing_edges += kinds.len() - 1;
        }
    }

    r.aogm = w.split * r.splits as f64
        + w.add_node * r.missing_nodes as f64
        + w.delete_node * r.spurious_nodes as f64
        + w.delete_edge * r.spurious_edges as f64
        + w.add_edge * r.missing_edges as f64
        + w.change_edge * r.wrong_edge_type as f64;
    r.aogm_empty = w.add_node * gt_nodes as f64 + w.add_edge * gt_edges.len() as f64;
    r.tra = if r.aogm_empty == 0.0 {
        if r.aogm == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - r.aogm.min(r.aogm_empty) / r.aogm_empty
    };
    Ok(r)
}

pub fn evaluate(
    pred: &[LabelImage],
    pred_tracks: &TrackTable,
    gt: &[LabelImage],
    gt_tracks: &TrackTable,
) -> Result<ScoreReport> {
    let mut r = tra_score(pred, pred_tracks, gt, gt_tracks)?;
    r.seg = seg_score(pred, gt)?;
    r.ctb = 0.5 * (r.seg + r.tra);
    Ok(r)
}
