//! Association weights between candidates of consecutive frames.

mod kdtree;

pub use kdtree::KdTree;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hierarchy::{CandidateSegment, FrameCandidates};

#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    /// Links kept per target candidate.
    pub k: usize,
    /// Neighbor search radius, in scaled pixel units.
    pub radius: f64,
    /// Per-axis `[z, y, x]` scale applied to centroids before the search.
    pub scale: [f64; 3],
    /// Exponent applied to the IoU.
    pub power: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            k: 4,
            radius: 30.0,
            scale: [1.0, 1.0, 1.0],
            power: 1.0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k < 1 {
            problems.push("k must be >= 1".to_string());
        }
        if !(self.radius > 0.0) {
            problems.push(format!("radius ({}) must be > 0", self.radius));
        }
        if !(self.power >= 1.0) {
            problems.push(format!("power ({}) must be >= 1", self.power));
        }
        if self.scale.iter().any(|s| !(*s > 0.0)) {
            problems.push(format!("axis scales {:?} must be > 0", self.scale));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParam(problems.join("; ")))
        }
    }
}

/// Candidate association from frame `t - 1` to frame `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkCandidate {
    pub source: u32,
    pub target: u32,
    pub iou: f64,
    /// `iou^power`, the objective coefficient.
    pub weight: f64,
}

/// Links into one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameLinks {
    /// Target frame.
    pub frame: usize,
    pub links: Vec<LinkCandidate>,
}

/// Intersection over union of two cropped masks. Masks whose bounding
/// boxes do not overlap are never read.
pub fn compute_iou(a: &CandidateSegment, b: &CandidateSegment) -> f64 {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for d in 0..3 {
        lo[d] = a.bbox_lo[d].max(b.bbox_lo[d]);
        hi[d] = a.bbox_hi[d].min(b.bbox_hi[d]);
        if lo[d] >= hi[d] {
            return 0.0;
        }
    }
    let (ea, eb) = (a.extent(), b.extent());
    let mut inter = 0usize;
    for z in lo[0]..hi[0] {
        for y in lo[1]..hi[1] {
            let ra = ((z - a.bbox_lo[0]) * ea[1] + (y - a.bbox_lo[1])) * ea[2];
            let rb = ((z - b.bbox_lo[0]) * eb[1] + (y - b.bbox_lo[1])) * eb[2];
            for x in lo[2]..hi[2] {
                if a.mask[ra + x - a.bbox_lo[2]] && b.mask[rb + x - b.bbox_lo[2]] {
                    inter += 1;
                }
            }
        }
    }
    let union = a.area + b.area - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn scaled(c: [f64; 3], s: [f64; 3]) -> [f64; 3] {
    [c[0] * s[0], c[1] * s[1], c[2] * s[2]]
}

/// For each candidate of `cur`, the `k` best-overlapping candidates of
/// `prev` among its `2k` nearest within the radius. Sorted by target, then
/// by decreasing IoU.
pub fn candidate_links(prev: &FrameCandidates, cur: &FrameCandidates, cfg: &LinkConfig) -> Result<FrameLinks> {
    cfg.validate()?;
    let mut out = FrameLinks {
        frame: cur.frame,
        links: Vec::new(),
    };
    if prev.is_empty() || cur.is_empty() {
        return Ok(out);
    }
    let centroids: Vec<[f64; 3]> = prev.candidates.iter().map(|c| scaled(c.centroid, cfg.scale)).collect();
    let tree = KdTree::build(&centroids);
    for target in &cur.candidates {
        let near = tree.nearest(scaled(target.centroid, cfg.scale), 2 * cfg.k, cfg.radius);
        let mut scored: Vec<(f64, f64, u32)> = near
            .into_iter()
            .map(|(id, d2)| (compute_iou(&prev.candidates[id as usize], target), d2, id))
            .filter(|s| s.0 > 0.0)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        scored.truncate(cfg.k);
        out.links.extend(scored.into_iter().map(|(iou, _, source)| LinkCandidate {
            source,
            target: target.id,
            iou,
            weight: iou.powf(cfg.power),
        }));
    }
    Ok(out)
}

/// Text dump, one `<t> <source> <target> <w>` line per link.
pub fn format_links(frames: &[FrameLinks]) -> String {
    let mut s = String::new();
    for f in frames {
        for l in &f.links {
            let _ = writeln!(s, "{} {} {} {}", f.frame, l.source, l.target, l.weight);
        }
    }
    s
}
