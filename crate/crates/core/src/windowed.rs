//! Long sequences solved as overlapping time windows in two passes.
//!
//! Even-indexed windows are solved first, independently of each other. Odd
//! windows are then solved with the even solutions pinned at their two
//! stitch frames. Every frame is committed by exactly one window: an odd
//! window `[s, e)` commits `[s + 1, e - 1)` (through the end of the sequence
//! when it is the last window) and even windows commit everything else.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ilp::{build_tracking_model, FrameStructure, Penalties, Pin, PinVar, Selection, SolveOptions, SolveStatus};
use crate::linking::FrameLinks;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSchedule {
    pub frames: usize,
    pub window: usize,
    pub overlap: usize,
    /// `[start, end)` local frame ranges.
    pub windows: Vec<(usize, usize)>,
}

impl WindowSchedule {
    pub fn new(frames: usize, window: usize, overlap: usize) -> Result<Self> {
        if frames == 0 {
            return Err(Error::InvalidParam("cannot schedule zero frames".into()));
        }
        if !(1 <= overlap && overlap < window) {
            return Err(Error::InvalidParam(format!(
                "need 1 <= overlap < window, got overlap {overlap} and window {window}"
            )));
        }
        if window >= frames {
            return Ok(Self { frames, window, overlap, windows: vec![(0, frames)] });
        }
        if window < 3 {
            return Err(Error::InvalidParam(format!("window ({window}) must be >= 3 when the sequence is split")));
        }
        let stride = window - overlap;
        let mut windows = Vec::new();
        let mut start = 0;
        loop {
            let end = (start + window).min(frames);
            windows.push((start, end));
            if end == frames {
                break;
            }
            start += stride;
        }
        if windows.len() >= 3 && 2 * overlap > window {
            return Err(Error::InvalidParam(format!(
                "overlap ({overlap}) must be at most half the window ({window}) so windows of one pass stay disjoint"
            )));
        }
        Ok(Self { frames, window, overlap, windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Frames committed by window `j`.
    pub fn committed(&self, j: usize) -> (usize, usize) {
        let n = self.windows.len();
        let (s, e) = self.windows[j];
        if n == 1 {
            return (s, e);
        }
        if j % 2 == 1 {
            (s + 1, if j + 1 == n { e } else { e - 1 })
        } else {
            let lo = if j == 0 { 0 } else { self.windows[j - 1].1 - 1 };
            let hi = if j + 1 == n { e } else { self.windows[j + 1].0 + 1 };
            (lo, hi)
        }
    }

    /// The window committing local frame `f`.
    pub fn owner(&self, f: usize) -> usize {
        (0..self.windows.len())
            .find(|&j| {
                let (lo, hi) = self.committed(j);
                (lo..hi).contains(&f)
            })
            .expect("commitment covers every frame")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceKind {
    Start,
    Finish,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub window: usize,
    pub kind: TraceKind,
}

/// Ordered log of window solve starts and finishes.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    seq: AtomicU64,
    events: Mutex<Vec<TraceEvent>>,
}

impl TraceRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, window: usize, kind: TraceKind) {
        let mut ev = self.events.lock().expect("trace lock");
        // taken under the lock so sequence order equals log order
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        ev.push(TraceEvent { seq, window, kind });
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().expect("trace lock").clone()
    }

    /// Pairs of overlapping windows that were in flight at the same time.
    pub fn overlapping_in_flight(&self, schedule: &WindowSchedule) -> Vec<(usize, usize)> {
        let mut running: Vec<usize> = Vec::new();
        let mut bad = Vec::new();
        for e in self.events() {
            match e.kind {
                TraceKind::Start => {
                    let (s, t) = schedule.windows[e.window];
                    for &r in &running {
                        let (rs, rt) = schedule.windows[r];
                        if s < rt && rs < t {
                            bad.push((r.min(e.window), r.max(e.window)));
                        }
                    }
                    running.push(e.window);
                }
                TraceKind::Finish => running.retain(|&r| r != e.window),
            }
        }
        bad
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub index: usize,
    pub pass: u8,
    pub start: usize,
    pub end: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub nodes: u64,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct WindowedSolution {
    pub selection: Selection,
    /// Objective of the stitched selection under the whole-sequence model.
    pub objective: f64,
    pub reports: Vec<WindowReport>,
}

struct WindowResult {
    report: WindowReport,
    selection: Selection,
}

struct Problem<'a> {
    frames: &'a [FrameStructure],
    links: &'a [FrameLinks],
    penalties: &'a Penalties,
    options: &'a SolveOptions,
    trace: Option<&'a TraceRecorder>,
    base: usize,
}

impl Problem<'_> {
    fn solve_window(&self, j: usize, pass: u8, (s, e): (usize, usize), pins: &[Pin]) -> Result<WindowResult> {
        if let Some(t) = self.trace {
            t.record(j, TraceKind::Start);
        }
        let out = (|| {
            let tm = build_tracking_model(&self.frames[s..e], self.links, self.penalties, pins)?;
            let sol = tm.solve(self.options);
            Ok::<_, Error>((tm.selection(&sol.values), sol))
        })();
        if let Some(t) = self.trace {
            t.record(j, TraceKind::Finish);
        }
        let (selection, sol) = out?;
        log::info!("window {j} pass {pass} status {} objective {}", sol.status, sol.objective);
        Ok(WindowResult {
            report: WindowReport {
                index: j,
                pass,
                start: self.base + s,
                end: self.base + e,
                status: sol.status,
                objective: sol.objective,
                nodes: sol.nodes,
                wall_time: sol.wall_time,
            },
            selection,
        })
    }
}

/// Solve `frames` window by window and stitch the committed parts.
pub fn solve_windowed(
    frames: &[FrameStructure],
    links: &[FrameLinks],
    penalties: &Penalties,
    schedule: &WindowSchedule,
    options: &SolveOptions,
    executor: &Executor,
    trace: Option<&TraceRecorder>,
) -> Result<WindowedSolution> {
    if frames.len() != schedule.frames {
        return Err(Error::InvalidParam(format!(
            "schedule covers {} frames but {} were given",
            schedule.frames,
            frames.len()
        )));
    }
    let base = frames.first().map_or(0, |f| f.frame);
    let problem = Problem { frames, links, penalties, options, trace, base };
    let n = schedule.len();

    let even_ids: Vec<usize> = (0..n).step_by(2).collect();
    let solved = executor.try_map(even_ids.len(), |k| {
        let j = even_ids[k];
        problem.solve_window(j, 1, schedule.windows[j], &[])
    })?;
    let mut results: Vec<Option<WindowResult>> = (0..n).map(|_| None).collect();
    for r in solved {
        let j = r.report.index;
        results[j] = Some(r);
    }

    let odd_ids: Vec<usize> = (1..n).step_by(2).collect();
    let solved = executor.try_map(odd_ids.len(), |k| {
        let j = odd_ids[k];
        let (s, e) = schedule.windows[j];
        let mut pins = Vec::new();
        let left = &results[j - 1].as_ref().expect("even pass done").selection;
        select_pins(&mut pins, left, frames, base + s);
        let right_frame = (j + 1 < n).then_some(e - 1);
        if let Some(f) = right_frame {
            let right = &results[j + 1].as_ref().expect("even pass done").selection;
            select_pins(&mut pins, right, frames, base + f);
            if schedule.overlap >= 2 {
                link_pins(&mut pins, right, links, base + f);
            }
        }
        let r = problem.solve_window(j, 2, (s, e), &pins)?;
        if r.report.status == SolveStatus::Infeasible {
            let at = match right_frame {
                Some(f) => format!("stitch frames {} and {}", base + s, base + f),
                None => format!("stitch frame {}", base + s),
            };
            return Err(Error::Infeasible(format!(
                "window {j} [{}, {}) has no solution consistent with its neighbors at {at}; increase the overlap",
                base + s,
                base + e
            )));
        }
        Ok(r)
    })?;
    for r in solved {
        let j = r.report.index;
        results[j] = Some(r);
    }
    let results: Vec<WindowResult> = results.into_iter().map(|r| r.expect("every window solved")).collect();

    let total = frames.len();
    let mut selection = Selection {
        first_frame: base,
        selected: vec![Vec::new(); total],
        links: vec![Vec::new(); total],
    };
    for f in 0..total {
        let owner = schedule.owner(f);
        let sel = &results[owner].selection;
        selection.selected[f] = sel.selected[f - schedule.windows[owner].0].clone();
        if f == 0 {
            continue;
        }
        let from = if schedule.windows[owner].0 < f { owner } else { schedule.owner(f - 1) };
        let sel = &results[from].selection;
        selection.links[f] = sel.links[f - schedule.windows[from].0].clone();
    }

    let full = build_tracking_model(frames, links, penalties, &[])?;
    let values = full.assignment(&selection)?;
    let objective = full.model.evaluate(&values);
    Ok(WindowedSolution {
        selection,
        objective,
        reports: results.into_iter().map(|r| r.report).collect(),
    })
}

fn select_pins(pins: &mut Vec<Pin>, sel: &Selection, frames: &[FrameStructure], frame: usize) {
    let len = frames[frame - frames[0].frame].len;
    for p in 0..len as u32 {
        pins.push(Pin {
            var: PinVar::Select { frame, cand: p },
            value: sel.is_selected(frame, p),
        });
    }
}

fn link_pins(pins: &mut Vec<Pin>, sel: &Selection, links: &[FrameLinks], frame: usize) {
    let chosen = &sel.links[frame - sel.first_frame];
    for fl in links.iter().filter(|fl| fl.frame == frame) {
        for l in &fl.links {
            pins.push(Pin {
                var: PinVar::Link { frame, source: l.source, target: l.target },
                value: chosen.contains(&(l.source, l.target)),
            });
        }
    }
}
