use super::solver::Solution;
use super::tracking::{Selection, TrackingModel};
use crate::error::{Error, Result};
use crate::grid::{LabelImage, Raster};
use crate::hierarchy::FrameCandidates;
use crate::tensor_io::{TrackRecord, TrackTable};

/// Tracks, painted label images and the track of every selected candidate.
#[derive(Clone, Debug)]
pub struct Lineage {
    pub first_frame: usize,
    pub tracks: TrackTable,
    pub labels: Vec<LabelImage>,
    /// Per frame, `(candidate, track label)` sorted by candidate.
    pub members: Vec<Vec<(u32, u32)>>,
}

impl Lineage {
    pub fn track_of(&self, frame: usize, cand: u32) -> Option<u32> {
        let f = &self.members[frame.checked_sub(self.first_frame)?];
        f.binary_search_by_key(&cand, |m| m.0).ok().map(|k| f[k].1)
    }
}

fn frame_slice<'a>(frames: &'a [FrameCandidates], sel: &Selection) -> Result<&'a [FrameCandidates]> {
    let base = frames.first().map_or(0, |f| f.frame);
    let lo = sel
        .first_frame
        .checked_sub(base)
        .ok_or_else(|| Error::Validation("selection starts before the candidate frames".into()))?;
    frames
        .get(lo..lo + sel.num_frames())
        .ok_or_else(|| Error::Validation("selection extends past the candidate frames".into()))
}

/// Decompose a selection into tracks. A track runs while its node has one
/// successor; a division ends it and starts one child track per successor.
pub fn build_lineage(sel: &Selection, frames: &[FrameCandidates]) -> Result<Lineage> {
    let frames = frame_slice(frames, sel)?;
    let n = sel.num_frames();
    let mut succ: Vec<Vec<Vec<u32>>> = frames.iter().map(|f| vec![Vec::new(); f.len()]).collect();
    let mut pred: Vec<Vec<Option<u32>>> = frames.iter().map(|f| vec![None; f.len()]).collect();
    let mut labels = Vec::with_capacity(n);
    for (i, f) in frames.iter().enumerate() {
        let t = sel.first_frame + i;
        if f.frame != t {
            return Err(Error::Validation(format!("candidate frames out of order at {t}")));
        }
        let mut img = Raster::filled(f.shape.clone(), 0u32);
        for &p in &sel.selected[i] {
            let c = f
                .candidates
                .get(p as usize)
                .ok_or_else(|| Error::Validation(format!("frame {t}: unknown candidate {p}")))?;
            for px in c.pixels(&f.shape) {
                if img[px] != 0 {
                    return Err(Error::Validation(format!(
                        "frame {t}: selected candidates {} and {p} overlap",
                        img[px] - 1
                    )));
                }
                img[px] = p + 1;
            }
        }
        labels.push(img);
        if i == 0 {
            if !sel.links[0].is_empty() {
                return Err(Error::Validation(format!("frame {t}: links into the first frame")));
            }
            continue;
        }
        for &(s, q) in &sel.links[i] {
            if !sel.is_selected(t - 1, s) || !sel.is_selected(t, q) {
                return Err(Error::Validation(format!("frame {t}: link {s} -> {q} touches an unselected candidate")));
            }
            if pred[i][q as usize].replace(s).is_some() {
                return Err(Error::Validation(format!("frame {t}: candidate {q} has two predecessors")));
            }
            succ[i - 1][s as usize].push(q);
            if succ[i - 1][s as usize].len() > 2 {
                return Err(Error::Validation(format!("frame {}: candidate {s} has more than two successors", t - 1)));
            }
        }
    }

    // walk tracks from their first node
    struct Walk {
        begin: usize,
        first_pixel: usize,
        nodes: Vec<(usize, u32)>,
        parent_node: Option<(usize, u32)>,
    }
    let mut walks = Vec::new();
    for i in 0..n {
        for &p in &sel.selected[i] {
            let starts = match pred[i][p as usize] {
                None => true,
                Some(s) => succ[i - 1][s as usize].len() == 2,
            };
            if !starts {
                continue;
            }
            let parent_node = pred[i][p as usize].map(|s| (i - 1, s));
            let mut nodes = vec![(i, p)];
            let (mut ci, mut cp) = (i, p);
            while ci + 1 < n && succ[ci][cp as usize].len() == 1 {
                cp = succ[ci][cp as usize][0];
                ci += 1;
                nodes.push((ci, cp));
            }
            walks.push(Walk {
                begin: i,
                first_pixel: frames[i].candidates[p as usize].first_pixel,
                nodes,
                parent_node,
            });
        }
    }
    walks.sort_by_key(|w| (w.begin, w.first_pixel));
    let mut members: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    for (k, w) in walks.iter().enumerate() {
        for &(i, p) in &w.nodes {
            members[i].push((p, k as u32 + 1));
        }
    }
    for m in &mut members {
        m.sort_unstable();
    }
    let label_at = |i: usize, p: u32| -> u32 {
        let f = &members[i];
        f[f.binary_search_by_key(&p, |m| m.0).expect("every selected node is on a track")].1
    };
    let records: Vec<TrackRecord> = walks
        .iter()
        .enumerate()
        .map(|(k, w)| TrackRecord {
            label: k as u32 + 1,
            begin: sel.first_frame + w.begin,
            end: sel.first_frame + w.nodes.last().unwrap().0,
            parent: w.parent_node.map_or(0, |(i, p)| label_at(i, p)),
        })
        .collect();
    for (i, img) in labels.iter_mut().enumerate() {
        for v in img.data_mut() {
            if *v != 0 {
                *v = label_at(i, *v - 1);
            }
        }
    }
    Ok(Lineage {
        first_frame: sel.first_frame,
        tracks: TrackTable::new(records)?,
        labels,
        members,
    })
}

/// All constraint and lineage violations of a tracking solution, checked on
/// the actual masks.
pub fn check_solution(tm: &TrackingModel, sol: &Solution, frames: &[FrameCandidates]) -> Vec<String> {
    let mut problems: Vec<String> = tm.model.violations(&sol.values).into_iter().map(str::to_string).collect();
    let sel = tm.selection(&sol.values);
    if let Err(e) = build_lineage(&sel, frames) {
        problems.push(e.to_string());
    }
    let fs = match frame_slice(frames, &sel) {
        Ok(fs) => fs,
        Err(e) => {
            problems.push(e.to_string());
            return problems;
        }
    };
    for (i, f) in fs.iter().enumerate() {
        let t = sel.first_frame + i;
        let mut outdeg = vec![0usize; f.len()];
        if i + 1 < sel.num_frames() {
            for &(s, _) in &sel.links[i + 1] {
                outdeg[s as usize] += 1;
            }
        }
        for p in 0..f.len() as u32 {
            let Some((_, _, d)) = tm.event_vars(t, p) else { continue };
            if (outdeg[p as usize] == 2) != sol.value(d) {
                problems.push(format!("frame {t}: candidate {p} division flag disagrees with out-degree"));
            }
        }
    }
    problems
}
