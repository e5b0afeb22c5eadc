//! Synthetic timelapses of moving, dividing blob cells with exact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Image, LabelImage, Raster, Shape};
use crate::tensor_io::{TrackRecord, TrackTable};

/// Placement attempts per cell before giving up.
const MAX_TRIES: usize = 2000;
/// Directions tried before a division is skipped.
const DIVISION_TRIES: usize = 16;
/// Full width at half maximum of a unit-sigma Gaussian, halved.
const HALF_MAX_RADIUS: f64 = 1.177_410_022_515_474_6;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub dims: Vec<usize>,
    pub frames: usize,
    pub cells: usize,
    /// Standard deviation of the per-axis random-walk step.
    pub step_sigma: f64,
    /// Chance that a cell divides between two consecutive frames.
    pub division_prob: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Minimum empty space between two cell boundaries.
    pub gap: f64,
    pub background: f32,
    /// Standard deviation of additive Gaussian noise; `0` for none.
    pub noise: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dims: vec![128, 128],
            frames: 30,
            cells: 20,
            step_sigma: 1.0,
            division_prob: 0.01,
            radius_min: 5.0,
            radius_max: 7.0,
            gap: 3.0,
            background: 0.1,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if let Err(e) = Shape::new(&self.dims) {
            bad.push(e.to_string());
        }
        if self.frames == 0 {
            bad.push("frames must be >= 1".to_string());
        }
        if !(self.radius_min >= 1.0 && self.radius_min <= self.radius_max) {
            bad.push(format!(
                "need 1 <= radius_min <= radius_max, got {} and {}",
                self.radius_min, self.radius_max
            ));
        }
        if !(0.0..=1.0).contains(&self.division_prob) {
            bad.push(format!("division_prob ({}) must lie in [0, 1]", self.division_prob));
        }
        if !(self.step_sigma >= 0.0) {
            bad.push(format!("step_sigma ({}) must be >= 0", self.step_sigma));
        }
        if !(self.gap >= 0.0) {
            bad.push(format!("gap ({}) must be >= 0", self.gap));
        }
        if !(self.noise >= 0.0) {
            bad.push(format!("noise ({}) must be >= 0", self.noise));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParam(bad.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<LabelImage>,
    pub tracks: TrackTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timelapse {
    pub images: Vec<Image>,
    pub truth: GroundTruth,
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    label: u32,
    center: [f64; 3],
    radius: f64,
    /// Radius the cell grows back to after a division.
    full_radius: f64,
}

struct World {
    shape: Shape,
    axes: Vec<usize>,
    gap: f64,
}

impl World {
    fn inside(&self, c: [f64; 3], r: f64) -> bool {
        let zyx = self.shape.zyx();
        self.axes
            .iter()
            .all(|&a| c[a] - r >= 1.0 && c[a] + r <= zyx[a] as f64 - 2.0)
    }

    fn clear_of(&self, c: [f64; 3], r: f64, others: &[Cell], skip: &[u32]) -> bool {
        others.iter().filter(|o| !skip.contains(&o.label)).all(|o| {
            let d2: f64 = (0..3).map(|a| (c[a] - o.center[a]).powi(2)).sum();
            d2 >= (r + o.radius + self.gap).powi(2)
        })
    }

    fn random_direction(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        loop {
            let mut d = [0.0; 3];
            for &a in &self.axes {
                d[a] = StandardNormal.sample(rng);
            }
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-9 {
                return d.map(|v| v / n);
            }
        }
    }
}

pub fn generate_timelapse(cfg: &SynthConfig) -> Result<Timelapse> {
    cfg.validate()?;
    let shape = Shape::new(&cfg.dims)?;
    let world = World {
        axes: (3 - shape.ndim()..3).collect(),
        shape: shape.clone(),
        gap: cfg.gap,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zyx = shape.zyx();

    let mut cells: Vec<Cell> = Vec::with_capacity(cfg.cells);
    for label in 1..=cfg.cells as u32 {
        let radius = rng.random_range(cfg.radius_min..=cfg.radius_max);
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let mut c = [0.0; 3];
            for &a in &world.axes {
                c[a] = rng.random_range(0.0..zyx[a] as f64);
            }
            if world.inside(c, radius) && world.clear_of(c, radius, &cells, &[]) {
                cells.push(Cell { label, center: c, radius, full_radius: radius });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidParam(format!(
                "overcrowded: cannot place cell {label} of {} in {:?} without overlap",
                cfg.cells, cfg.dims
            )));
        }
    }

    let mut records: Vec<TrackRecord> = cells
        .iter()
        .map(|c| TrackRecord { label: c.label, begin: 0, end: 0, parent: 0 })
        .collect();
    let mut next_label = cfg.cells as u32 + 1;
    let step = Normal::new(0.0, cfg.step_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let mut states = vec![cells.clone()];

    for t in 1..cfg.frames {
        let mut next: Vec<Cell> = Vec::with_capacity(cells.len() + 2);
        let mut born: Vec<u32> = Vec::new();
        // divisions first, against the positions of every other cell
        let mut i = 0;
        while i < cells.len() {
            let parent = cells[i];
            if rng.random_bool(cfg.division_prob) {
                let cr = (0.75 * parent.radius).max(cfg.radius_min);
                let offset = cr + 0.5 * cfg.gap;
                let mut split = None;
                for _ in 0..DIVISION_TRIES {
                    let d = world.random_direction(&mut rng);
                    let a = [0, 1, 2].map(|k| parent.center[k] + d[k] * offset);
                    let b = [0, 1, 2].map(|k| parent.center[k] - d[k] * offset);
                    let ok = |c: [f64; 3], placed: &[Cell]| {
                        world.inside(c, cr)
                            && world.clear_of(c, cr, &cells, &[parent.label])
                            && world.clear_of(c, cr, placed, &[])
                    };
                    if ok(a, &next) && ok(b, &next) {
                        split = Some((a, b));
                        break;
                    }
                }
                if let Some((a, b)) = split {
                    for c in [a, b] {
                        next.push(Cell { label: next_label, center: c, radius: cr, full_radius: parent.full_radius });
                        records.push(TrackRecord { label: next_label, begin: t, end: t, parent: parent.label });
                        born.push(next_label);
                        next_label += 1;
                    }
                    cells.remove(i);
                    continue;
                }
            }
            i += 1;
        }
        // every surviving cell takes one random step, growing back if it can
        for k in 0..cells.len() {
            let mut c = cells[k];
            let others: Vec<Cell> = cells.iter().chain(&next).copied().filter(|o| o.label != c.label).collect();
            let r = (c.radius + 0.1 * c.full_radius).min(c.full_radius);
            let mut moved = c.center;
            for &a in &world.axes {
                moved[a] += step.sample(&mut rng);
            }
            if world.inside(moved, r) && world.clear_of(moved, r, &others, &[]) {
                c.center = moved;
                c.radius = r;
            } else if world.inside(c.center, r) && world.clear_of(c.center, r, &others, &[]) {
                c.radius = r;
            }
            cells[k] = c;
        }
        let mut all: Vec<Cell> = cells.clone();
        all.extend(next);
        all.sort_by_key(|c| c.label);
        for c in &all {
            if !born.contains(&c.label) {
                records[(c.label - 1) as usize].end = t;
            }
        }
        cells = all;
        states.push(cells.clone());
    }

    let noise = Normal::new(0.0f32, cfg.noise).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let mut images = Vec::with_capacity(cfg.frames);
    let mut labels = Vec::with_capacity(cfg.frames);
    for state in &states {
        let (img, lab) = render(&shape, state, cfg.background);
        let img = if cfg.noise > 0.0 {
            img.map(|&v| v + noise.sample(&mut rng))
        } else {
            img
        };
        images.push(img);
        labels.push(lab);
    }
    Ok(Timelapse {
        images,
        truth: GroundTruth { labels, tracks: TrackTable::new(records)? },
    })
}

fn render(shape: &Shape, cells: &[Cell], background: f32) -> (Image, LabelImage) {
    let zyx = shape.zyx();
    let mut acc = vec![0.0f64; shape.len()];
    let mut lab = Raster::filled(shape.clone(), 0u32);
    for c in cells {
        let s = c.radius / HALF_MAX_RADIUS;
        let reach = 3.0 * s;
        let lo = [0, 1, 2].map(|a| ((c.center[a] - reach).floor().max(0.0)) as usize);
        let hi = [0, 1, 2].map(|a| ((c.center[a] + reach).ceil().max(0.0) as usize).min(zyx[a] - 1));
        for z in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for x in lo[2]..=hi[2] {
                    let p = [z, y, x];
                    let d2: f64 = (0..3).map(|a| (p[a] as f64 - c.center[a]).powi(2)).sum();
                    let i = shape.index(p);
                    acc[i] += (-d2 / (2.0 * s * s)).exp();
                    if d2 <= c.radius * c.radius {
                        lab[i] = c.label;
                    }
                }
            }
        }
    }
    let img = acc.into_iter().map(|v| background + v as f32).collect();
    (Raster::from_vec(shape.clone(), img).expect("same shape"), lab)
}

/// Instance pixel lists of one label image, indexed by label.
fn instances(labels: &LabelImage) -> Vec<(u32, Vec<usize>)> {
    let mut by: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, &l) in labels.data().iter().enumerate() {
        if l != 0 {
            by.entry(l).or_default().push(i);
        }
    }
    by.into_iter().collect()
}

fn centroid(shape: &Shape, px: &[usize]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for &i in px {
        let p = shape.coords(i);
        for a in 0..3 {
            c[a] += p[a] as f64;
        }
    }
    c.map(|v| v / px.len() as f64)
}

/// Cut a random `fraction` of instances in two along a random line through
/// their centroid. Each frame is corrupted independently.
pub fn corrupt_split(labels: &[LabelImage], fraction: f64, seed: u64) -> Vec<LabelImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|img| {
            let shape = img.shape().clone();
            let axes: Vec<usize> = (3 - shape.ndim()..3).collect();
            let mut out = img.clone();
            let mut fresh = img.data().iter().copied().max().unwrap_or(0) + 1;
            for (_, px) in instances(img) {
                if !rng.random_bool(fraction) {
                    continue;
                }
                let c = centroid(&shape, &px);
                let mut n = [0.0f64; 3];
                for &a in &axes {
                    n[a] = StandardNormal.sample(&mut rng);
                }
                for &i in &px {
                    let p = shape.coords(i);
                    let side: f64 = (0..3).map(|a| (p[a] as f64 - c[a]) * n[a]).sum();
                    if side > 0.0 {
                        out[i] = fresh;
                    }
                }
                fresh += 1;
            }
            out
        })
        .collect()
}

/// Fuse a random `fraction` of instances with the touching neighbor they
/// share the longest border with. No pixels are added, so isolated
/// instances stay as they are.
pub fn corrupt_merge(labels: &[LabelImage], fraction: f64, seed: u64) -> Vec<LabelImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|img| {
            let shape = img.shape().clone();
            let mut out = img.clone();
            let mut used = std::collections::HashSet::new();
            for (k, px) in instances(img) {
                if used.contains(&k) || !rng.random_bool(fraction) {
                    continue;
                }
                let mut contact: std::collections::BTreeMap<u32, usize> = Default::default();
                for &i in &px {
                    for j in shape.neighbors(i) {
                        let l = img[j];
                        if l != 0 && l != k && !used.contains(&l) {
                            *contact.entry(l).or_default() += 1;
                        }
                    }
                }
                let Some((&j, _)) = contact.iter().max_by_key(|&(&l, &n)| (n, std::cmp::Reverse(l))) else {
                    continue;
                };
                used.insert(k);
                used.insert(j);
                for (o, &l) in out.data_mut().iter_mut().zip(img.data()) {
                    if l == j {
                        *o = k;
                    }
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cells: usize, frames: usize) -> SynthConfig {
        SynthConfig {
            dims: vec![40, 40],
            frames,
            cells,
            radius_min: 3.0,
            radius_max: 4.0,
            ..Default::default()
        }
    }

    #[test]
    fn one_cell_one_frame() {
        let t = generate_timelapse(&small(1, 1)).unwrap();
        assert_eq!(t.truth.tracks.records, vec![TrackRecord { label: 1, begin: 0, end: 0, parent: 0 }]);
        let labeled: Vec<u32> = t.truth.labels[0].data().iter().copied().filter(|&l| l != 0).collect();
        assert!(!labeled.is_empty() && labeled.iter().all(|&l| l == 1));
    }

    #[test]
    fn forced_division() {
        let cfg = SynthConfig { division_prob: 1.0, ..small(1, 2) };
        let t = generate_timelapse(&cfg).unwrap();
        assert_eq!(
            t.truth.tracks.records,
            vec![
                TrackRecord { label: 1, begin: 0, end: 0, parent: 0 },
                TrackRecord { label: 2, begin: 1, end: 1, parent: 1 },
                TrackRecord { label: 3, begin: 1, end: 1, parent: 1 },
            ]
        );
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { noise: 0.05, division_prob: 0.1, ..small(5, 8) };
        assert_eq!(generate_timelapse(&cfg).unwrap(), generate_timelapse(&cfg).unwrap());
    }

    #[test]
    fn overcrowding_is_an_error() {
        let cfg = SynthConfig { dims: vec![12, 12], ..small(30, 1) };
        assert!(generate_timelapse(&cfg).unwrap_err().to_string().contains("overcrowded"));
    }

    #[test]
    fn labels_agree_with_tracks() {
        let cfg = SynthConfig { division_prob: 0.08, ..small(6, 12) };
        let t = generate_timelapse(&cfg).unwrap();
        for r in &t.truth.tracks.records {
            for (f, img) in t.truth.labels.iter().enumerate() {
                let present = img.data().contains(&r.label);
                assert_eq!(present, (r.begin..=r.end).contains(&f), "label {} frame {f}", r.label);
            }
        }
        assert!(t.truth.tracks.records.iter().any(|r| r.parent != 0));
    }

    #[test]
    fn three_dimensional() {
        let cfg = SynthConfig { dims: vec![16, 24, 24], ..small(3, 3) };
        let t = generate_timelapse(&cfg).unwrap();
        assert_eq!(t.truth.tracks.len(), 3);
        assert!(t.truth.labels[2].data().contains(&3));
    }

    #[test]
    fn corruptions_change_instance_counts() {
        let t = generate_timelapse(&small(6, 1)).unwrap();
        let count = |img: &LabelImage| instances(img).len();
        let split = corrupt_split(&t.truth.labels, 1.0, 1);
        assert_eq!(count(&split[0]), 12);
        // isolated cells are left alone
        assert_eq!(corrupt_merge(&t.truth.labels, 1.0, 1), t.truth.labels);

        let img = Raster::from_vec(Shape::d1(9), vec![1, 1, 2, 2, 0, 3, 3, 4, 4]).unwrap();
        let merged = corrupt_merge(&[img], 1.0, 1);
        assert_eq!(merged[0].data(), &[1, 1, 1, 1, 0, 3, 3, 3, 3]);
    }
}
