//! Exact depth-first branch and bound for binary programs.
//!
//! Variables are split into independent components (connected through
//! shared rows) that are solved one after another. Each node propagates row
//! activity bounds to a fixpoint, then bounds the best completion either by
//! the sum of positive free coefficients or, where the model declares
//! selector blocks, by a dynamic program over the block forest.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use super::model::{Model, Sense};

const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Time limit reached; the assignment is feasible but not proven optimal.
    Feasible,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Absolute optimality gap at which a subtree is pruned.
    pub gap_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            gap_tolerance: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub values: Vec<bool>,
    pub objective: f64,
    pub status: SolveStatus,
    pub nodes: u64,
    pub wall_time: Duration,
}

impl Solution {
    pub fn value(&self, var: u32) -> bool {
        self.values[var as usize]
    }

    /// `name value` lines for every variable.
    pub fn dump(&self, model: &Model) -> String {
        let mut s = String::new();
        for (i, name) in model.names().iter().enumerate() {
            let _ = writeln!(s, "{name} {}", self.values[i] as u8);
        }
        s
    }
}

pub fn solve(model: &Model, options: &SolveOptions) -> Solution {
    let start = Instant::now();
    let deadline = options.time_limit.map(|d| start + d);
    let mut search = Search::new(model);
    let mut values = vec![false; model.num_vars()];
    let mut status = SolveStatus::Optimal;
    let mut nodes = 0;

    if !search.root_propagate() {
        return Solution {
            values,
            objective: 0.0,
            status: SolveStatus::Infeasible,
            nodes: 0,
            wall_time: start.elapsed(),
        };
    }
    for comp in components(model) {
        let outcome = search.solve_component(&comp, options.gap_tolerance, deadline);
        nodes += outcome.nodes;
        match outcome.best {
            Some(assign) => {
                for (&v, &x) in comp.vars.iter().zip(&assign) {
                    values[v as usize] = x;
                }
                if !outcome.complete {
                    status = SolveStatus::Feasible;
                }
            }
            None => {
                status = SolveStatus::Infeasible;
                break;
            }
        }
    }
    let objective = if status == SolveStatus::Infeasible { 0.0 } else { model.evaluate(&values) };
    if status == SolveStatus::Infeasible {
        values.iter_mut().for_each(|v| *v = false);
    }
    Solution {
        values,
        objective,
        status,
        nodes,
        wall_time: start.elapsed(),
    }
}

/// Variables and blocks that share no row with the rest of the model.
struct Component {
    vars: Vec<u32>,
    /// Branching order over `vars`.
    order: Vec<u32>,
    /// Block indices, children before parents.
    blocks: Vec<u32>,
    /// Variables not covered by any block of the component.
    loose: Vec<u32>,
    rows: Vec<u32>,
    /// Blocks grouped by hierarchy root, children before parents.
    trees: Vec<Vec<u32>>,
}

fn components(model: &Model) -> Vec<Component> {
    let n = model.num_vars();
    let mut uf = crate::hierarchy::union_find::DisjointSet::new(n);
    for c in model.constraints() {
        for w in c.terms.windows(2) {
            uf.union(w[0].0, w[1].0);
        }
    }
    let mut comp_of_root = vec![u32::MAX; n];
    let mut comps: Vec<Component> = Vec::new();
    let mut comp_of_var = vec![0u32; n];
    for v in 0..n as u32 {
        let r = uf.find(v) as usize;
        if comp_of_root[r] == u32::MAX {
            comp_of_root[r] = comps.len() as u32;
            comps.push(Component {
                vars: Vec::new(),
                order: Vec::new(),
                blocks: Vec::new(),
                loose: Vec::new(),
                rows: Vec::new(),
                trees: Vec::new(),
            });
        }
        comp_of_var[v as usize] = comp_of_root[r];
        comps[comp_of_root[r] as usize].vars.push(v);
    }
    let mut covered = vec![false; n];
    for (bi, b) in model.blocks().iter().enumerate() {
        comps[comp_of_var[b.selector as usize] as usize].blocks.push(bi as u32);
        covered[b.selector as usize] = true;
        for &m in &b.inflow {
            covered[m as usize] = true;
        }
        if let Some(o) = &b.outflow {
            covered[o.ending as usize] = true;
            covered[o.division as usize] = true;
        }
    }
    for (r, c) in model.constraints().iter().enumerate() {
        if let Some(&(v, _)) = c.terms.first() {
            comps[comp_of_var[v as usize] as usize].rows.push(r as u32);
        }
    }
    let obj = model.objective();
    for comp in &mut comps {
        comp.loose = comp.vars.iter().copied().filter(|&v| !covered[v as usize]).collect();
        comp.order = comp.vars.clone();
        comp.order.sort_by(|&a, &b| {
            obj[b as usize]
                .abs()
                .total_cmp(&obj[a as usize].abs())
                .then_with(|| model.name(a).cmp(model.name(b)))
        });
        comp.blocks.sort_by_key(|&b| block_depth_key(model, b));
        let mut tree_of_root: HashMap<u32, usize> = HashMap::new();
        for &b in &comp.blocks {
            let mut root = b;
            while let Some(p) = model.blocks()[root as usize].parent {
                root = p;
            }
            let t = *tree_of_root.entry(root).or_insert_with(|| {
                comp.trees.push(Vec::new());
                comp.trees.len() - 1
            });
            comp.trees[t].push(b);
        }
    }
    comps
}

/// Which variables appear as an inflow link and in an outflow.
fn link_sides(model: &Model) -> (Vec<bool>, Vec<bool>) {
    let n = model.num_vars();
    let (mut has_in, mut has_out) = (vec![false; n], vec![false; n]);
    for b in model.blocks() {
        for (i, &m) in b.inflow.iter().enumerate() {
            if b.inflow_is_link[i] {
                has_in[m as usize] = true;
            }
        }
        if let Some(o) = &b.outflow {
            for &l in &o.links {
                has_out[l as usize] = true;
            }
        }
    }
    (has_in, has_out)
}

/// Sort key placing children before their parents.
fn block_depth_key(model: &Model, b: u32) -> (std::cmp::Reverse<usize>, u32) {
    let mut depth = 0;
    let mut cur = b;
    while let Some(p) = model.blocks()[cur as usize].parent {
        depth += 1;
        cur = p;
    }
    (std::cmp::Reverse(depth), b)
}

struct Outcome {
    best: Option<Vec<bool>>,
    complete: bool,
    nodes: u64,
}

struct RowState {
    fixed: f64,
    pos_free: f64,
    neg_free: f64,
}

/// Assignment state shared across components (rows never span two).
struct Search<'a> {
    model: &'a Model,
    /// -1 free, 0 or 1 fixed.
    value: Vec<i8>,
    rows: Vec<RowState>,
    columns: Vec<Vec<(u32, f64)>>,
    trail: Vec<u32>,
    queue: Vec<u32>,
    queued: Vec<bool>,
    /// Portion of each link weight credited to its target block; the rest
    /// goes to the source block.
    target_share: Vec<f64>,
    /// Subgradient step scale.
    theta: f64,
    // per-block scratch of the bound
    own: Vec<f64>,
    child_sum: Vec<f64>,
    in_pick: Vec<u32>,
    out_pick: Vec<OutPick>,
    taken: Vec<bool>,
    kids_open: Vec<bool>,
    // per-tree state of the component being solved
    tree_of: Vec<u32>,
    tree_value: Vec<f64>,
    tree_dirty: Vec<bool>,
    dirty: Vec<u32>,
    /// Block taking each variable as inflow, and as outflow link.
    target_block: Vec<u32>,
    source_block: Vec<u32>,
    two_sided: Vec<bool>,
    /// Two-sided links whose ends currently disagree, with positions.
    disagreeing: Vec<u32>,
    disagree_pos: Vec<u32>,
    // per-variable scratch of the candidate assignment
    cand: Vec<bool>,
    t_pick: Vec<bool>,
    s_pick: Vec<bool>,
}

impl<'a> Search<'a> {
    fn new(model: &'a Model) -> Self {
        let n = model.num_vars();
        let mut columns = vec![Vec::new(); n];
        let mut rows = Vec::with_capacity(model.num_constraints());
        for (ri, c) in model.constraints().iter().enumerate() {
            let mut st = RowState {
                fixed: 0.0,
                pos_free: 0.0,
                neg_free: 0.0,
            };
            for &(v, a) in &c.terms {
                columns[v as usize].push((ri as u32, a));
                if a > 0.0 {
                    st.pos_free += a;
                } else {
                    st.neg_free += a;
                }
            }
            rows.push(st);
        }
        let nb = model.blocks().len();
        let obj = model.objective();
        let (has_in, has_out) = link_sides(model);
        let target_share = (0..n)
            .map(|v| match (has_in[v], has_out[v]) {
                (true, true) => 0.5 * obj[v],
                (true, false) => obj[v],
                _ => 0.0,
            })
            .collect();
        let (mut target_block, mut source_block) = (vec![u32::MAX; n], vec![u32::MAX; n]);
        for (bi, b) in model.blocks().iter().enumerate() {
            for &m in &b.inflow {
                target_block[m as usize] = bi as u32;
            }
            if let Some(o) = &b.outflow {
                for &l in &o.links {
                    source_block[l as usize] = bi as u32;
                }
            }
        }
        Search {
            model,
            value: vec![-1; n],
            rows,
            columns,
            trail: Vec::new(),
            queue: Vec::new(),
            queued: vec![false; model.num_constraints()],
            target_share,
            theta: 1.0,
            own: vec![0.0; nb],
            child_sum: vec![0.0; nb],
            in_pick: vec![u32::MAX; nb],
            out_pick: vec![OutPick::default(); nb],
            taken: vec![false; nb],
            kids_open: vec![false; nb],
            tree_of: vec![u32::MAX; nb],
            tree_value: Vec::new(),
            tree_dirty: Vec::new(),
            dirty: Vec::new(),
            target_block,
            source_block,
            two_sided: (0..n).map(|v| has_in[v] && has_out[v]).collect(),
            disagreeing: Vec::new(),
            disagree_pos: vec![u32::MAX; n],
            cand: vec![false; n],
            t_pick: vec![false; n],
            s_pick: vec![false; n],
        }
    }

    fn assign(&mut self, v: u32, x: bool) {
        debug_assert_eq!(self.value[v as usize], -1);
        self.value[v as usize] = x as i8;
        self.trail.push(v);
        for &(r, a) in &self.columns[v as usize] {
            let st = &mut self.rows[r as usize];
            if x {
                st.fixed += a;
            }
            if a > 0.0 {
                st.pos_free -= a;
            } else {
                st.neg_free -= a;
            }
            if !self.queued[r as usize] {
                self.queued[r as usize] = true;
                self.queue.push(r);
            }
        }
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            let x = self.value[v as usize] == 1;
            self.value[v as usize] = -1;
            for &(r, a) in &self.columns[v as usize] {
                let st = &mut self.rows[r as usize];
                if x {
                    st.fixed -= a;
                }
                if a > 0.0 {
                    st.pos_free += a;
                } else {
                    st.neg_free += a;
                }
            }
        }
    }

    fn clear_queue(&mut self) {
        for r in self.queue.drain(..) {
            self.queued[r as usize] = false;
        }
    }

    /// Propagate queued rows to a fixpoint; false on conflict.
    fn propagate(&mut self) -> bool {
        let model = self.model;
        while let Some(r) = self.queue.pop() {
            self.queued[r as usize] = false;
            let c = &model.constraints()[r as usize];
            let st = &self.rows[r as usize];
            let lo = st.fixed + st.neg_free;
            let hi = st.fixed + st.pos_free;
            let check_le = c.sense != Sense::Ge;
            let check_ge = c.sense != Sense::Le;
            if (check_le && lo > c.rhs + EPS) || (check_ge && hi < c.rhs - EPS) {
                self.clear_queue();
                return false;
            }
            let mut forced: Vec<(u32, bool)> = Vec::new();
            for &(v, a) in &c.terms {
                if self.value[v as usize] != -1 {
                    continue;
                }
                if check_le {
                    // lo assumes the cheaper value; flipping it must stay within rhs
                    if a > 0.0 && lo + a > c.rhs + EPS {
                        forced.push((v, false));
                        continue;
                    }
                    if a < 0.0 && lo - a > c.rhs + EPS {
                        forced.push((v, true));
                        continue;
                    }
                }
                if check_ge {
                    if a > 0.0 && hi - a < c.rhs - EPS {
                        forced.push((v, true));
                        continue;
                    }
                    if a < 0.0 && hi + a < c.rhs - EPS {
                        forced.push((v, false));
                    }
                }
            }
            for (v, x) in forced {
                if self.value[v as usize] == -1 {
                    self.assign(v, x);
                }
            }
        }
        true
    }

    fn root_propagate(&mut self) -> bool {
        for r in 0..self.model.num_constraints() as u32 {
            self.queued[r as usize] = true;
            self.queue.push(r);
        }
        self.propagate()
    }

    /// Objective of the variables outside every block under the current
    /// fixings, free ones at their better value.
    fn loose_value(&self, comp: &Component) -> f64 {
        let obj = self.model.objective();
        let mut total = 0.0;
        for &v in &comp.loose {
            let c = obj[v as usize];
            match self.value[v as usize] {
                1 => total += c,
                -1 if c > 0.0 => total += c,
                _ => {}
            }
        }
        total
    }

    /// Re-solve one hierarchy tree under the current splits: its share of
    /// the Lagrangian bound, the blocks it selects, and its part of the
    /// candidate assignment.
    fn refresh_tree(&mut self, comp: &Component, t: u32) {
        let model = self.model;
        let blocks = model.blocks();
        let tree = &comp.trees[t as usize];
        for &bi in tree {
            self.child_sum[bi as usize] = 0.0;
        }
        let mut value = 0.0;
        for &bi in tree {
            let b = &blocks[bi as usize];
            let sel = self.value[b.selector as usize];
            let own = if sel == 0 { f64::NEG_INFINITY } else { self.block_own(bi) };
            self.own[bi as usize] = own;
            let children = self.child_sum[bi as usize];
            let best = match sel {
                1 => own,
                0 => children,
                _ => own.max(children),
            };
            match b.parent {
                Some(p) => self.child_sum[p as usize] += best,
                None => value += best,
            }
        }
        self.tree_value[t as usize] = value;

        for &bi in tree.iter().rev() {
            let b = &blocks[bi as usize];
            let open = b.parent.is_none_or(|p| self.kids_open[p as usize]);
            let sel = self.value[b.selector as usize];
            let own = self.own[bi as usize];
            let take = open
                && match sel {
                    1 => true,
                    0 => false,
                    _ => own > f64::NEG_INFINITY && own >= self.child_sum[bi as usize],
                };
            self.taken[bi as usize] = take;
            self.kids_open[bi as usize] = open && !take;
        }

        for &bi in tree {
            let b = &blocks[bi as usize];
            let taken = self.taken[bi as usize];
            self.cand[b.selector as usize] = taken || self.value[b.selector as usize] == 1;
            let in_pick = self.in_pick[bi as usize];
            for (i, &m) in b.inflow.iter().enumerate() {
                let picked = taken && in_pick == m;
                if b.inflow_is_link[i] {
                    self.t_pick[m as usize] = picked;
                    self.touch_link(m);
                } else {
                    self.cand[m as usize] = picked || self.value[m as usize] == 1;
                }
            }
            if let Some(o) = &b.outflow {
                let pick = self.out_pick[bi as usize];
                for (v, x) in [(o.ending, pick.ending), (o.division, pick.division)] {
                    self.cand[v as usize] = if taken { x } else { self.value[v as usize] == 1 };
                }
                for &l in &o.links {
                    self.s_pick[l as usize] = taken && pick.links.contains(&l);
                    self.touch_link(l);
                }
            }
        }
    }

    /// Candidate value and disagreement status of one link.
    fn touch_link(&mut self, v: u32) {
        let i = v as usize;
        self.cand[i] = self.value[i] == 1 || self.t_pick[i] || self.s_pick[i];
        if !self.two_sided[i] {
            return;
        }
        let differs = self.t_pick[i] != self.s_pick[i];
        let pos = self.disagree_pos[i];
        if differs && pos == u32::MAX {
            self.disagree_pos[i] = self.disagreeing.len() as u32;
            self.disagreeing.push(v);
        } else if !differs && pos != u32::MAX {
            let last = *self.disagreeing.last().expect("listed");
            self.disagreeing.swap_remove(pos as usize);
            if last != v {
                self.disagree_pos[last as usize] = pos;
            }
            self.disagree_pos[i] = u32::MAX;
        }
    }

    fn mark_dirty(&mut self, block: u32) {
        if block == u32::MAX {
            return;
        }
        let t = self.tree_of[block as usize];
        if !self.tree_dirty[t as usize] {
            self.tree_dirty[t as usize] = true;
            self.dirty.push(t);
        }
    }

    fn in_weight(&self, v: u32, is_link: bool) -> f64 {
        if is_link {
            self.target_share[v as usize]
        } else {
            self.model.objective()[v as usize]
        }
    }

    fn out_weight(&self, v: u32) -> f64 {
        self.model.objective()[v as usize] - self.target_share[v as usize]
    }

    /// Best value of one selected block, remembering its picks.
    fn block_own(&mut self, bi: u32) -> f64 {
        let model = self.model;
        let obj = model.objective();
        let b = &model.blocks()[bi as usize];
        let mut in_best = f64::NEG_INFINITY;
        let mut in_pick = u32::MAX;
        let mut forced = false;
        for (i, &m) in b.inflow.iter().enumerate() {
            let w = self.in_weight(m, b.inflow_is_link[i]);
            match self.value[m as usize] {
                1 if !forced => {
                    forced = true;
                    in_best = w;
                    in_pick = m;
                }
                -1 if !forced && w > in_best => {
                    in_best = w;
                    in_pick = m;
                }
                _ => {}
            }
        }
        self.in_pick[bi as usize] = in_pick;
        let out = match &b.outflow {
            None => 0.0,
            Some(o) => {
                let (v, pick) = self.outflow_best(o);
                self.out_pick[bi as usize] = pick;
                v
            }
        };
        obj[b.selector as usize] + in_best + out
    }

    fn outflow_best(&self, o: &super::model::Outflow) -> (f64, OutPick) {
        let obj = self.model.objective();
        let mut fixed: [u32; 2] = [u32::MAX; 2];
        let mut fixed_links = 0usize;
        let mut fixed_w = 0.0;
        // two best free links
        let mut top: [(f64, u32); 2] = [(f64::NEG_INFINITY, u32::MAX); 2];
        let mut free = 0usize;
        for &l in &o.links {
            match self.value[l as usize] {
                1 => {
                    if fixed_links < 2 {
                        fixed[fixed_links] = l;
                    }
                    fixed_links += 1;
                    fixed_w += self.out_weight(l);
                }
                -1 => {
                    free += 1;
                    let w = self.out_weight(l);
                    if w > top[0].0 {
                        top[1] = top[0];
                        top[0] = (w, l);
                    } else if w > top[1].0 {
                        top[1] = (w, l);
                    }
                }
                _ => {}
            }
        }
        let mut best = (f64::NEG_INFINITY, OutPick::default());
        for ending in [false, true] {
            if !allowed(self.value[o.ending as usize], ending) {
                continue;
            }
            for division in [false, true] {
                if !allowed(self.value[o.division as usize], division) {
                    continue;
                }
                let n = 1 + division as usize;
                let Some(n) = n.checked_sub(ending as usize) else { continue };
                if n < fixed_links || n > fixed_links + free {
                    continue;
                }
                let extra = n - fixed_links;
                let links: f64 = fixed_w + top[..extra].iter().map(|t| t.0).sum::<f64>();
                let v = links
                    + if ending { obj[o.ending as usize] } else { 0.0 }
                    + if division { obj[o.division as usize] } else { 0.0 };
                if v > best.0 {
                    let mut links = [u32::MAX; 2];
                    let mut k = 0;
                    for &f in fixed.iter().take(fixed_links.min(2)) {
                        links[k] = f;
                        k += 1;
                    }
                    for t in &top[..extra] {
                        links[k] = t.1;
                        k += 1;
                    }
                    best = (v, OutPick { links, ending, division });
                }
            }
        }
        best
    }

    fn candidate_feasible(&self, comp: &Component) -> bool {
        let cons = self.model.constraints();
        comp.rows.iter().all(|&r| cons[r as usize].is_satisfied(&self.cand))
    }

    fn candidate_value(&self, comp: &Component) -> f64 {
        let obj = self.model.objective();
        comp.vars.iter().filter(|&&v| self.cand[v as usize]).map(|&v| obj[v as usize]).sum()
    }

    /// Bound the node with up to `iters` subgradient steps on the link
    /// splits. Offers every feasible candidate to `incumbent`. After the
    /// first pass only the trees touched by a changed split are re-solved.
    fn evaluate(&mut self, comp: &Component, iters: usize, incumbent: &mut Incumbent, gap: f64) -> NodeEval {
        let iters = iters.max(1);
        let loose = self.loose_value(comp);
        let obj = self.model.objective();
        for &v in &comp.loose {
            let x = self.value[v as usize];
            self.cand[v as usize] = x == 1 || (x == -1 && obj[v as usize] > 0.0);
        }
        for v in self.disagreeing.drain(..) {
            self.disagree_pos[v as usize] = u32::MAX;
        }
        for t in 0..comp.trees.len() as u32 {
            self.refresh_tree(comp, t);
        }
        let mut bound = f64::INFINITY;
        let mut theta = self.theta;
        let mut stale = 0;
        let mut last_gain = 0;
        for it in 0..iters {
            let mut dirty = std::mem::take(&mut self.dirty);
            for &t in &dirty {
                self.tree_dirty[t as usize] = false;
                self.refresh_tree(comp, t);
            }
            dirty.clear();
            self.dirty = dirty;

            let l = loose + self.tree_value.iter().sum::<f64>();
            if l < bound - 1e-9 * bound.abs().max(1.0) {
                last_gain = it;
            }
            if l < bound - 1e-12 {
                bound = l;
                stale = 0;
            } else {
                stale += 1;
                if stale >= 4 {
                    theta = (theta * 0.5).max(1e-3);
                    stale = 0;
                }
            }
            let disagree = self.disagreeing.len();
            // a stalled bound is closed faster by branching
            let stalled = it >= last_gain + STALL_ITERATIONS;
            if disagree == 0 || bound <= incumbent.value + gap + EPS || it + 1 >= iters || stalled {
                if self.candidate_feasible(comp) {
                    incumbent.offer(self.candidate_value(comp), comp, &self.cand);
                }
                break;
            }
            let target = if incumbent.value > f64::NEG_INFINITY {
                incumbent.value
            } else {
                l - 0.05 * l.abs() - 0.05
            };
            let step = theta * (l - target).max(1e-6) / disagree as f64;
            for i in 0..self.disagreeing.len() {
                let v = self.disagreeing[i] as usize;
                let u = &mut self.target_share[v];
                *u += if self.t_pick[v] { -step } else { step };
                // keep splits within a sane range of the weight
                let w = obj[v].abs().max(1.0);
                *u = u.clamp(-4.0 * w, 4.0 * w);
                self.mark_dirty(self.target_block[v]);
                self.mark_dirty(self.source_block[v]);
            }
        }
        self.theta = theta.max(0.05);
        NodeEval {
            bound,
            branch: self.branch_choice(comp),
        }
    }

    /// Variable to branch on and the value to try first.
    fn branch_choice(&self, comp: &Component) -> Option<(u32, bool)> {
        let obj = self.model.objective();
        if !self.disagreeing.is_empty() {
            // the heaviest link whose ends disagree
            let mut best: Option<u32> = None;
            for &v in &self.disagreeing {
                if self.value[v as usize] == -1
                    && best.is_none_or(|b| {
                        obj[v as usize].total_cmp(&obj[b as usize]).then(b.cmp(&v)) == std::cmp::Ordering::Greater
                    })
                {
                    best = Some(v);
                }
            }
            if let Some(v) = best {
                return Some((v, true));
            }
        }
        let cons = self.model.constraints();
        for &r in &comp.rows {
            let c = &cons[r as usize];
            if !c.is_satisfied(&self.cand) {
                if let Some(&(v, _)) = c.terms.iter().find(|(v, _)| self.value[*v as usize] == -1) {
                    return Some((v, self.cand[v as usize]));
                }
            }
        }
        comp.order
            .iter()
            .find(|&&v| self.value[v as usize] == -1)
            .map(|&v| (v, self.cand[v as usize]))
    }

    fn solve_component(&mut self, comp: &Component, gap: f64, deadline: Option<Instant>) -> Outcome {
        let root_mark = self.trail.len();
        let mut incumbent = Incumbent { value: f64::NEG_INFINITY, values: None };
        let mut nodes = 0u64;
        let mut timed_out = false;
        let mut dive_only = false;
        self.theta = 1.0;

        struct Decision {
            var: u32,
            mark: usize,
            first: bool,
            second_tried: bool,
        }
        let mut stack: Vec<Decision> = Vec::new();
        for (t, tree) in comp.trees.iter().enumerate() {
            for &b in tree {
                self.tree_of[b as usize] = t as u32;
            }
        }
        self.tree_value = vec![0.0; comp.trees.len()];
        self.tree_dirty = vec![false; comp.trees.len()];
        self.dirty.clear();
        'search: loop {
            nodes += 1;
            if !dive_only {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        timed_out = true;
                        if incumbent.values.is_some() {
                            break 'search;
                        }
                        // no incumbent yet: finish with a plain dive
                        dive_only = true;
                    }
                }
            }
            let iters = if dive_only {
                1
            } else if nodes == 1 {
                ROOT_ITERATIONS
            } else {
                NODE_ITERATIONS
            };
            let ev = self.evaluate(comp, iters, &mut incumbent, gap);
            if dive_only && incumbent.values.is_some() {
                break 'search;
            }
            if dive_only || ev.bound > incumbent.value + gap + EPS {
                if let Some((v, first)) = ev.branch {
                    stack.push(Decision {
                        var: v,
                        mark: self.trail.len(),
                        first,
                        second_tried: false,
                    });
                    self.assign(v, first);
                    if self.propagate() {
                        continue 'search;
                    }
                }
            }
            // backtrack
            loop {
                let Some(top) = stack.last_mut() else { break 'search };
                let mark = top.mark;
                if top.second_tried {
                    stack.pop();
                    self.undo_to(mark);
                    continue;
                }
                top.second_tried = true;
                let (v, x) = (top.var, !top.first);
                self.undo_to(mark);
                self.assign(v, x);
                if self.propagate() {
                    continue 'search;
                }
            }
        }
        self.undo_to(root_mark);
        self.clear_queue();
        Outcome {
            best: incumbent.values,
            complete: !timed_out,
            nodes,
        }
    }
}

const ROOT_ITERATIONS: usize = 200;
const NODE_ITERATIONS: usize = 12;
const STALL_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, Default)]
struct OutPick {
    links: [u32; 2],
    ending: bool,
    division: bool,
}

struct NodeEval {
    bound: f64,
    branch: Option<(u32, bool)>,
}

struct Incumbent {
    value: f64,
    values: Option<Vec<bool>>,
}

impl Incumbent {
    fn offer(&mut self, value: f64, comp: &Component, cand: &[bool]) {
        if value > self.value {
            self.value = value;
            self.values = Some(comp.vars.iter().map(|&v| cand[v as usize]).collect());
        }
    }
}

fn allowed(fixed: i8, x: bool) -> bool {
    fixed == -1 || (fixed == 1) == x
}
