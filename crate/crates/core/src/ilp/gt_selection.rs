use super::model::{Block, Model, Sense};
use super::solver::{solve, Solution, SolveOptions};
use crate::error::Result;
use crate::hierarchy::{CandidateSegment, FrameCandidates};
use crate::linking::compute_iou;

/// Program choosing disjoint hierarchy nodes that best cover ground truth.
#[derive(Clone, Debug)]
pub struct GtSelectionModel {
    pub model: Model,
    /// Selection variable per candidate.
    pub select: Vec<u32>,
    /// `(candidate, gt index, var, iou)` for overlapping pairs.
    pub pairs: Vec<(u32, u32, u32, f64)>,
}

impl GtSelectionModel {
    /// Matched `(candidate, gt index)` pairs.
    pub fn matches(&self, sol: &Solution) -> Vec<(u32, u32)> {
        self.pairs
            .iter()
            .filter(|p| sol.value(p.2))
            .map(|p| (p.0, p.1))
            .collect()
    }
}

pub fn build_gt_selection_model(frame: &FrameCandidates, gt: &[CandidateSegment]) -> Result<GtSelectionModel> {
    let mut model = Model::new();
    let mut select = Vec::with_capacity(frame.len());
    for p in 0..frame.len() {
        select.push(model.add_var(format!("y_{p}"), 0.0)?);
    }
    let mut pairs = Vec::new();
    let mut by_cand: Vec<Vec<u32>> = vec![Vec::new(); frame.len()];
    let mut by_gt: Vec<Vec<u32>> = vec![Vec::new(); gt.len()];
    for (p, c) in frame.candidates.iter().enumerate() {
        for (g, m) in gt.iter().enumerate() {
            let iou = compute_iou(c, m);
            if iou > 0.0 {
                let v = model.add_var(format!("x_{p}_{g}"), iou)?;
                pairs.push((p as u32, g as u32, v, iou));
                by_cand[p].push(v);
                by_gt[g].push(v);
            }
        }
    }
    // each selected segment takes exactly one ground-truth instance
    for p in 0..frame.len() {
        let mut terms = vec![(select[p], 1.0)];
        terms.extend(by_cand[p].iter().map(|&v| (v, -1.0)));
        model.add_constraint(format!("seg_{p}"), terms, Sense::Eq, 0.0);
    }
    for (g, vs) in by_gt.iter().enumerate() {
        if !vs.is_empty() {
            model.add_constraint(format!("gt_{g}"), vs.iter().map(|&v| (v, 1.0)).collect(), Sense::Le, 1.0);
        }
    }
    for &(p, q) in &frame.exclusions {
        model.add_constraint(
            format!("excl_{p}_{q}"),
            vec![(select[p as usize], 1.0), (select[q as usize], 1.0)],
            Sense::Le,
            1.0,
        );
    }
    let blocks = (0..frame.len())
        .map(|p| Block {
            selector: select[p],
            inflow: by_cand[p].clone(),
            inflow_is_link: vec![false; by_cand[p].len()],
            outflow: None,
            parent: frame.parent[p],
        })
        .collect();
    model.set_blocks(blocks);
    Ok(GtSelectionModel { model, select, pairs })
}

/// Best total IoU achievable by selecting disjoint candidates, with the matches.
pub fn select_ground_truth(frame: &FrameCandidates, gt: &[CandidateSegment]) -> Result<(f64, Vec<(u32, u32)>)> {
    let m = build_gt_selection_model(frame, gt)?;
    let sol = solve(&m.model, &SolveOptions::default());
    Ok((sol.objective, m.matches(&sol)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;

    fn seg(s: &Shape, px: &[usize], id: u32) -> CandidateSegment {
        let mut c = CandidateSegment::from_pixels(s, px);
        c.id = id;
        c
    }

    fn frame_of(s: &Shape, segs: Vec<CandidateSegment>, parent: Vec<Option<u32>>) -> FrameCandidates {
        let mut f = FrameCandidates::empty(0, s.clone());
        f.candidates = segs;
        f.parent = parent;
        for id in 0..f.len() as u32 {
            for a in f.ancestors(id) {
                f.exclusions.push((id, a));
            }
        }
        f
    }

    #[test]
    fn identical_single_node() {
        let s = Shape::d1(4);
        let f = frame_of(&s, vec![seg(&s, &[1, 2], 0)], vec![None]);
        let (obj, m) = select_ground_truth(&f, &[seg(&s, &[1, 2], 0)]).unwrap();
        assert_eq!(obj, 1.0);
        assert_eq!(m, vec![(0, 0)]);
    }

    #[test]
    fn part_beats_union() {
        let s = Shape::d1(4);
        let f = frame_of(
            &s,
            vec![seg(&s, &[0, 1], 0), seg(&s, &[2, 3], 1), seg(&s, &[0, 1, 2, 3], 2)],
            vec![Some(2), Some(2), None],
        );
        let gt = [seg(&s, &[0, 1], 0)];
        let (obj, m) = select_ground_truth(&f, &gt).unwrap();
        assert_eq!(obj, 1.0);
        assert_eq!(m, vec![(0, 0)]);
        // the five feasible selections: {}, {A}, {B}, {A,B}, {AB}
        let best_enumerated = [0.0, 1.0, 0.0, 1.0, 0.5f64].into_iter().fold(0.0, f64::max);
        assert_eq!(obj, best_enumerated);
    }

    #[test]
    fn no_ground_truth() {
        let s = Shape::d1(3);
        let f = frame_of(&s, vec![seg(&s, &[0], 0)], vec![None]);
        let (obj, m) = select_ground_truth(&f, &[]).unwrap();
        assert_eq!(obj, 0.0);
        assert!(m.is_empty());
    }
}
