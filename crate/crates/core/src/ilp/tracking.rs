use std::collections::HashSet;

use super::model::{Block, Model, Outflow, Sense};
use super::solver::{solve, Solution, SolveOptions};
use crate::error::{Error, Result};
use crate::hierarchy::FrameCandidates;
use crate::linking::FrameLinks;

/// Nesting structure of one frame's candidates, all the model needs.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStructure {
    pub frame: usize,
    pub len: usize,
    pub parent: Vec<Option<u32>>,
    /// `(inner, outer)` pairs that may not be selected together.
    pub exclusions: Vec<(u32, u32)>,
}

impl From<&FrameCandidates> for FrameStructure {
    fn from(f: &FrameCandidates) -> Self {
        FrameStructure {
            frame: f.frame,
            len: f.len(),
            parent: f.parent.clone(),
            exclusions: f.exclusions.clone(),
        }
    }
}

/// Objective weights of appearance, disappearance and division; all `<= 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalties {
    pub appear: f64,
    pub disappear: f64,
    pub divide: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            appear: -0.5,
            disappear: -0.5,
            divide: -0.1,
        }
    }
}

impl Penalties {
    pub fn validate(&self) -> Result<()> {
        let bad: Vec<String> = [("w_alpha", self.appear), ("w_beta", self.disappear), ("w_delta", self.divide)]
            .iter()
            .filter(|(_, v)| !(*v <= 0.0))
            .map(|(k, v)| format!("{k} ({v}) must be <= 0"))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParam(bad.join("; ")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PinVar {
    Select { frame: usize, cand: u32 },
    /// Link into `frame` from `source` in the frame before.
    Link { frame: usize, source: u32, target: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pin {
    pub var: PinVar,
    pub value: bool,
}

/// Selected candidates and links, independent of any variable numbering.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub first_frame: usize,
    /// Per frame, sorted candidate ids.
    pub selected: Vec<Vec<u32>>,
    /// Per frame, `(source, target)` links into it; empty for the first frame.
    pub links: Vec<Vec<(u32, u32)>>,
}

impl Selection {
    pub fn num_frames(&self) -> usize {
        self.selected.len()
    }

    pub fn is_selected(&self, frame: usize, cand: u32) -> bool {
        self.selected[frame - self.first_frame].binary_search(&cand).is_ok()
    }

    pub fn num_links(&self) -> usize {
        self.links.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Copy, Debug)]
struct CandVars {
    y: u32,
    a: u32,
    b: u32,
    d: u32,
}

/// Tracking program over consecutive frames, with the variable of every
/// selection, event and link.
#[derive(Clone, Debug)]
pub struct TrackingModel {
    pub model: Model,
    first_frame: usize,
    vars: Vec<Vec<CandVars>>,
    /// Per frame, `(source, target, var)` for links into it.
    links: Vec<Vec<(u32, u32, u32)>>,
}

impl TrackingModel {
    pub fn first_frame(&self) -> usize {
        self.first_frame
    }

    pub fn num_frames(&self) -> usize {
        self.vars.len()
    }

    fn local(&self, frame: usize) -> Option<usize> {
        frame.checked_sub(self.first_frame).filter(|&i| i < self.vars.len())
    }

    pub fn select_var(&self, frame: usize, cand: u32) -> Option<u32> {
        self.local(frame).and_then(|i| self.vars[i].get(cand as usize)).map(|v| v.y)
    }

    pub fn link_var(&self, frame: usize, source: u32, target: u32) -> Option<u32> {
        let i = self.local(frame)?;
        self.links[i]
            .binary_search_by_key(&(source, target), |&(s, t, _)| (s, t))
            .ok()
            .map(|k| self.links[i][k].2)
    }

    /// Event variables `(appear, disappear, divide)` of a candidate.
    pub fn event_vars(&self, frame: usize, cand: u32) -> Option<(u32, u32, u32)> {
        self.local(frame)
            .and_then(|i| self.vars[i].get(cand as usize))
            .map(|v| (v.a, v.b, v.d))
    }

    pub fn selection(&self, values: &[bool]) -> Selection {
        Selection {
            first_frame: self.first_frame,
            selected: self
                .vars
                .iter()
                .map(|f| (0..f.len() as u32).filter(|&p| values[f[p as usize].y as usize]).collect())
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| l.iter().filter(|x| values[x.2 as usize]).map(|x| (x.0, x.1)).collect())
                .collect(),
        }
    }

    /// Full assignment realizing a selection, with events derived from the
    /// link degrees. Fails if the selection uses a link the model lacks.
    pub fn assignment(&self, sel: &Selection) -> Result<Vec<bool>> {
        if sel.first_frame != self.first_frame || sel.num_frames() != self.num_frames() {
            return Err(Error::Model("selection does not cover the model's frames".into()));
        }
        let mut values = vec![false; self.model.num_vars()];
        let mut indeg: Vec<Vec<u32>> = self.vars.iter().map(|f| vec![0; f.len()]).collect();
        let mut outdeg = indeg.clone();
        for (i, links) in sel.links.iter().enumerate() {
            for &(s, t) in links {
                let v = self
                    .link_var(self.first_frame + i, s, t)
                    .ok_or_else(|| Error::Model(format!("frame {}: no link {s} -> {t}", self.first_frame + i)))?;
                values[v as usize] = true;
                indeg[i][t as usize] += 1;
                outdeg[i - 1][s as usize] += 1;
            }
        }
        for (i, sel_f) in sel.selected.iter().enumerate() {
            for &p in sel_f {
                let cv = self.vars[i][p as usize];
                values[cv.y as usize] = true;
                values[cv.a as usize] = indeg[i][p as usize] == 0;
                values[cv.b as usize] = outdeg[i][p as usize] == 0;
                values[cv.d as usize] = outdeg[i][p as usize] == 2;
            }
        }
        Ok(values)
    }

    /// Clear `divide` together with `disappear` where both are set; the pair
    /// cancels in the flow row and neither earns a positive weight.
    pub fn canonicalize(&self, sol: &mut Solution) {
        for f in &self.vars {
            for cv in f {
                if sol.values[cv.b as usize] && sol.values[cv.d as usize] {
                    sol.values[cv.b as usize] = false;
                    sol.values[cv.d as usize] = false;
                }
            }
        }
        sol.objective = self.model.evaluate(&sol.values);
    }

    pub fn solve(&self, options: &SolveOptions) -> Solution {
        let mut s = solve(&self.model, options);
        if s.status != super::solver::SolveStatus::Infeasible {
            self.canonicalize(&mut s);
        }
        s
    }
}

/// Assemble the tracking program over `frames`, which must be consecutive.
/// `links` may cover more frames; only links between the given frames are used.
pub fn build_tracking_model(
    frames: &[FrameStructure],
    links: &[FrameLinks],
    penalties: &Penalties,
    pins: &[Pin],
) -> Result<TrackingModel> {
    penalties.validate()?;
    let first = frames.first().map_or(0, |f| f.frame);
    for (i, f) in frames.iter().enumerate() {
        if f.frame != first + i {
            return Err(Error::Model(format!("frames not consecutive at {}", f.frame)));
        }
        if f.parent.len() != f.len {
            return Err(Error::Model(format!("frame {}: parent list length mismatch", f.frame)));
        }
    }
    let last = first + frames.len().saturating_sub(1);
    let mut model = Model::new();
    let mut vars = Vec::with_capacity(frames.len());
    for f in frames {
        let t = f.frame;
        let mut fv = Vec::with_capacity(f.len);
        for p in 0..f.len {
            let appear = if t == first { 0.0 } else { penalties.appear };
            let disappear = if t == last { 0.0 } else { penalties.disappear };
            fv.push(CandVars {
                y: model.add_var(format!("y_{t}_{p}"), 0.0)?,
                a: model.add_var(format!("a_{t}_{p}"), appear)?,
                b: model.add_var(format!("b_{t}_{p}"), disappear)?,
                d: model.add_var(format!("d_{t}_{p}"), penalties.divide)?,
            });
        }
        vars.push(fv);
    }
    let mut link_vars: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); frames.len()];
    for fl in links {
        if fl.frame <= first || fl.frame > last {
            continue;
        }
        let i = fl.frame - first;
        for l in &fl.links {
            if l.source as usize >= frames[i - 1].len || l.target as usize >= frames[i].len {
                return Err(Error::Model(format!(
                    "frame {}: link {} -> {} references an unknown candidate",
                    fl.frame, l.source, l.target
                )));
            }
            if !(l.weight >= 0.0) {
                return Err(Error::Model(format!("frame {}: negative link weight {}", fl.frame, l.weight)));
            }
            let v = model.add_var(format!("x_{}_{}_{}", fl.frame, l.source, l.target), l.weight)?;
            link_vars[i].push((l.source, l.target, v));
        }
        link_vars[i].sort_unstable();
    }

    // flow in: y - a - sum(x in) = 0; flow out: y + d - b - sum(x out) = 0
    let mut inflow: Vec<Vec<Vec<u32>>> = vars.iter().map(|f| vec![Vec::new(); f.len()]).collect();
    let mut outflow = inflow.clone();
    for (i, lv) in link_vars.iter().enumerate() {
        for &(s, t, v) in lv {
            inflow[i][t as usize].push(v);
            outflow[i - 1][s as usize].push(v);
        }
    }
    for (i, f) in frames.iter().enumerate() {
        let t = f.frame;
        for p in 0..f.len {
            let cv = vars[i][p];
            let mut terms = vec![(cv.y, 1.0), (cv.a, -1.0)];
            terms.extend(inflow[i][p].iter().map(|&x| (x, -1.0)));
            model.add_constraint(format!("in_{t}_{p}"), terms, Sense::Eq, 0.0);
            let mut terms = vec![(cv.y, 1.0), (cv.d, 1.0), (cv.b, -1.0)];
            terms.extend(outflow[i][p].iter().map(|&x| (x, -1.0)));
            model.add_constraint(format!("out_{t}_{p}"), terms, Sense::Eq, 0.0);
        }
        for p in 0..f.len {
            let cv = vars[i][p];
            model.add_constraint(format!("div_{t}_{p}"), vec![(cv.y, 1.0), (cv.d, -1.0)], Sense::Ge, 0.0);
        }
        let mut excl: Vec<(u32, u32)> = f.exclusions.clone();
        excl.sort_unstable();
        excl.dedup();
        for &(p, q) in &excl {
            if p as usize >= f.len || q as usize >= f.len || p == q {
                return Err(Error::Model(format!("frame {t}: bad exclusion pair ({p}, {q})")));
            }
            model.add_constraint(
                format!("excl_{t}_{p}_{q}"),
                vec![(vars[i][p as usize].y, 1.0), (vars[i][q as usize].y, 1.0)],
                Sense::Le,
                1.0,
            );
        }
    }

    let mut pinned_on: HashSet<(usize, u32)> = HashSet::new();
    for pin in pins {
        let (v, name) = match pin.var {
            PinVar::Select { frame, cand } => {
                let v = frame
                    .checked_sub(first)
                    .and_then(|i| vars.get(i))
                    .and_then(|f| f.get(cand as usize))
                    .map(|cv| cv.y)
                    .ok_or_else(|| Error::Model(format!("pin on unknown candidate {cand} in frame {frame}")))?;
                if pin.value {
                    pinned_on.insert((frame, cand));
                }
                (v, format!("y_{frame}_{cand}"))
            }
            PinVar::Link { frame, source, target } => {
                let v = frame
                    .checked_sub(first)
                    .and_then(|i| link_vars.get(i))
                    .and_then(|l| l.binary_search_by_key(&(source, target), |&(s, t, _)| (s, t)).ok().map(|k| l[k].2))
                    .ok_or_else(|| Error::Model(format!("pin on unknown link {source} -> {target} into frame {frame}")))?;
                (v, format!("x_{frame}_{source}_{target}"))
            }
        };
        model.add_constraint(format!("pin_{name}"), vec![(v, 1.0)], Sense::Eq, pin.value as u8 as f64);
    }
    for f in frames {
        for &(p, q) in &f.exclusions {
            if pinned_on.contains(&(f.frame, p)) && pinned_on.contains(&(f.frame, q)) {
                return Err(Error::Model(format!(
                    "frame {}: pinned candidates {p} and {q} are mutually exclusive",
                    f.frame
                )));
            }
        }
    }

    // selector blocks for the solver's bound
    let mut blocks = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let mut ids = Vec::with_capacity(f.len);
        for p in 0..f.len {
            ids.push((blocks.len() + p) as u32);
        }
        let nested = parents_consistent(f);
        for p in 0..f.len {
            let cv = vars[i][p];
            let mut members = vec![cv.a];
            members.extend(&inflow[i][p]);
            let mut is_link = vec![true; members.len()];
            is_link[0] = false;
            blocks.push(Block {
                selector: cv.y,
                inflow: members,
                inflow_is_link: is_link,
                outflow: Some(Outflow {
                    ending: cv.b,
                    division: cv.d,
                    links: outflow[i][p].clone(),
                }),
                parent: if nested { f.parent[p].map(|q| ids[q as usize]) } else { None },
            });
        }
    }
    model.set_blocks(blocks);

    Ok(TrackingModel {
        model,
        first_frame: first,
        vars,
        links: link_vars,
    })
}

/// True when every ancestor pair of the parent forest is an exclusion pair.
fn parents_consistent(f: &FrameStructure) -> bool {
    let excl: HashSet<(u32, u32)> = f.exclusions.iter().copied().collect();
    for p in 0..f.len as u32 {
        let mut cur = p;
        let mut steps = 0;
        while let Some(q) = f.parent[cur as usize] {
            if q as usize >= f.len || !excl.contains(&(p, q)) || steps > f.len {
                return false;
            }
            cur = q;
            steps += 1;
        }
    }
    true
}
