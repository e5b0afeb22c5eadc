//! End-to-end configuration and stage orchestration: intensity to maps,
//! maps to candidates, candidates to links, links to a stitched lineage.

use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::{ContourMap, ForegroundMask, Image, LabelImage};
use crate::hierarchy::{extract_frame_candidates, FrameCandidates, HierarchyParams};
use crate::ilp::{build_lineage, build_tracking_model, FrameStructure, Lineage, Penalties, SolveOptions, TrackingModel};
use crate::linking::{candidate_links, FrameLinks, LinkConfig};
use crate::preprocess::{detect_foreground, intensity_to_contour};
use crate::windowed::{solve_windowed, TraceRecorder, WindowSchedule, WindowedSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub sigma_low: f32,
    pub sigma_high: f32,
    pub contour_sigma: f32,
    pub hierarchy: HierarchyParams,
    pub linking: LinkConfig,
    pub penalties: Penalties,
    pub window: usize,
    pub overlap: usize,
    /// Worker threads; `0` uses every core.
    pub parallelism: usize,
    /// Per-window solver limit in seconds; `0` for none.
    pub time_limit: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sigma_low: 1.0,
            sigma_high: 8.0,
            contour_sigma: 1.0,
            hierarchy: HierarchyParams::default(),
            linking: LinkConfig::default(),
            penalties: Penalties::default(),
            window: 50,
            overlap: 5,
            parallelism: 0,
            time_limit: 0.0,
        }
    }
}

const KEYS: &[&str] = &[
    "sigma_low",
    "sigma_high",
    "contour_sigma",
    "min_size",
    "max_size",
    "strength_threshold",
    "k",
    "radius",
    "axis_scales",
    "power",
    "w_alpha",
    "w_beta",
    "w_delta",
    "window",
    "overlap",
    "parallelism",
    "time_limit",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

impl PipelineConfig {
    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    /// Set one parameter from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let r: std::result::Result<(), String> = (|| {
            match key {
                "sigma_low" => self.sigma_low = num(key, v)?,
                "sigma_high" => self.sigma_high = num(key, v)?,
                "contour_sigma" => self.contour_sigma = num(key, v)?,
                "min_size" => self.hierarchy.min_size = num(key, v)?,
                "max_size" => self.hierarchy.max_size = num(key, v)?,
                "strength_threshold" => self.hierarchy.strength_threshold = num(key, v)?,
                "k" => self.linking.k = num(key, v)?,
                "radius" => self.linking.radius = num(key, v)?,
                "axis_scales" => {
                    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(format!("axis_scales: expected three comma-separated values, got {v:?}"));
                    }
                    for (a, p) in parts.iter().enumerate() {
                        self.linking.scale[a] = num(key, p)?;
                    }
                }
                "power" => self.linking.power = num(key, v)?,
                "w_alpha" => self.penalties.appear = num(key, v)?,
                "w_beta" => self.penalties.disappear = num(key, v)?,
                "w_delta" => self.penalties.divide = num(key, v)?,
                "window" => self.window = num(key, v)?,
                "overlap" => self.overlap = num(key, v)?,
                "parallelism" => self.parallelism = num(key, v)?,
                "time_limit" => self.time_limit = num(key, v)?,
                _ => return Err(format!("unknown key {key:?}")),
            }
            Ok(())
        })();
        r.map_err(Error::InvalidParam)
    }

    /// Read `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(k.trim(), v).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let l = &self.linking;
        let _ = writeln!(s, "sigma_low = {}", self.sigma_low);
        let _ = writeln!(s, "sigma_high = {}", self.sigma_high);
        let _ = writeln!(s, "contour_sigma = {}", self.contour_sigma);
        let _ = writeln!(s, "min_size = {}", self.hierarchy.min_size);
        let _ = writeln!(s, "max_size = {}", self.hierarchy.max_size);
        let _ = writeln!(s, "strength_threshold = {}", self.hierarchy.strength_threshold);
        let _ = writeln!(s, "k = {}", l.k);
        let _ = writeln!(s, "radius = {}", l.radius);
        let _ = writeln!(s, "axis_scales = {},{},{}", l.scale[0], l.scale[1], l.scale[2]);
        let _ = writeln!(s, "power = {}", l.power);
        let _ = writeln!(s, "w_alpha = {}", self.penalties.appear);
        let _ = writeln!(s, "w_beta = {}", self.penalties.disappear);
        let _ = writeln!(s, "w_delta = {}", self.penalties.divide);
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "overlap = {}", self.overlap);
        let _ = writeln!(s, "parallelism = {}", self.parallelism);
        let _ = writeln!(s, "time_limit = {}", self.time_limit);
        s
    }

    /// Every problem across all stages, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.sigma_low >= 0.0 && self.sigma_low < self.sigma_high) {
            bad.push(format!(
                "need 0 <= sigma_low < sigma_high, got {} and {}",
                self.sigma_low, self.sigma_high
            ));
        }
        if !(self.contour_sigma >= 0.0) {
            bad.push(format!("contour_sigma ({}) must be >= 0", self.contour_sigma));
        }
        for r in [self.hierarchy.validate(), self.linking.validate(), self.penalties.validate()] {
            if let Err(e) = r {
                bad.push(e.to_string());
            }
        }
        if !(1 <= self.overlap && self.overlap < self.window) {
            bad.push(format!(
                "need 1 <= overlap < window, got overlap {} and window {}",
                self.overlap, self.window
            ));
        }
        if self.window < 3 {
            bad.push(format!("window ({}) must be >= 3", self.window));
        }
        if !(self.time_limit >= 0.0 && self.time_limit.is_finite()) {
            bad.push(format!("time_limit ({}) must be a finite number of seconds >= 0", self.time_limit));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParam(bad.join("; ")))
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            time_limit: (self.time_limit > 0.0).then(|| Duration::from_secs_f64(self.time_limit)),
            ..SolveOptions::default()
        }
    }

    pub fn executor(&self) -> Result<Executor> {
        Executor::new(self.parallelism)
    }
}

/// Foreground and contour maps of every frame.
pub fn preprocess_frames(images: &[Image], cfg: &PipelineConfig, ex: &Executor) -> Result<Vec<(ForegroundMask, ContourMap)>> {
    ex.try_map(images.len(), |t| {
        let fg = detect_foreground(&images[t], cfg.sigma_low, cfg.sigma_high)?;
        let contour = intensity_to_contour(&images[t], cfg.contour_sigma)?;
        Ok((fg.mask, contour))
    })
}

pub fn extract_candidates(
    maps: &[(ForegroundMask, ContourMap)],
    params: &HierarchyParams,
    ex: &Executor,
) -> Result<Vec<FrameCandidates>> {
    ex.try_map(maps.len(), |t| extract_frame_candidates(t, &maps[t].0, &maps[t].1, params))
}

/// Links into every frame after the first.
pub fn link_frames(cands: &[FrameCandidates], cfg: &LinkConfig, ex: &Executor) -> Result<Vec<FrameLinks>> {
    ex.try_map(cands.len().saturating_sub(1), |i| candidate_links(&cands[i], &cands[i + 1], cfg))
}

pub fn frame_structures(cands: &[FrameCandidates]) -> Vec<FrameStructure> {
    cands.iter().map(FrameStructure::from).collect()
}

/// The whole-sequence program, for export or comparison.
pub fn full_model(cands: &[FrameCandidates], links: &[FrameLinks], cfg: &PipelineConfig) -> Result<TrackingModel> {
    build_tracking_model(&frame_structures(cands), links, &cfg.penalties, &[])
}

#[derive(Clone, Debug)]
pub struct TrackOutput {
    pub candidates: Vec<FrameCandidates>,
    pub links: Vec<FrameLinks>,
    pub solution: WindowedSolution,
    pub lineage: Lineage,
}

impl TrackOutput {
    pub fn labels(&self) -> &[LabelImage] {
        &self.lineage.labels
    }
}

/// Candidates, links, windowed solve and lineage from per-frame maps.
pub fn track_maps(
    maps: &[(ForegroundMask, ContourMap)],
    cfg: &PipelineConfig,
    ex: &Executor,
    trace: Option<&TraceRecorder>,
) -> Result<TrackOutput> {
    cfg.validate()?;
    if maps.is_empty() {
        return Err(Error::InvalidParam("no frames to track".into()));
    }
    let candidates = extract_candidates(maps, &cfg.hierarchy, ex)?;
    let links = link_frames(&candidates, &cfg.linking, ex)?;
    let schedule = WindowSchedule::new(maps.len(), cfg.window, cfg.overlap)?;
    let solution = solve_windowed(
        &frame_structures(&candidates),
        &links,
        &cfg.penalties,
        &schedule,
        &cfg.solve_options(),
        ex,
        trace,
    )?;
    let lineage = build_lineage(&solution.selection, &candidates)?;
    Ok(TrackOutput { candidates, links, solution, lineage })
}

/// Preprocess intensity frames, then track.
pub fn track_images(images: &[Image], cfg: &PipelineConfig, ex: &Executor) -> Result<TrackOutput> {
    cfg.validate()?;
    let maps = preprocess_frames(images, cfg, ex)?;
    track_maps(&maps, cfg, ex, None)
}
