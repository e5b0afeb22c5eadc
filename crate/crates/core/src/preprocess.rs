//! Turning raw intensities or label images into the two tracking inputs:
//! a binary foreground and a fuzzy contour map.

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, ContourMap, ForegroundMask, Image, LabelImage, Raster, Shape};

pub const OTSU_BINS: usize = 256;

/// Normalized, truncated 1D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let sigma = sigma as f64;
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Mirror an out-of-range index back into `0..n` (`d c b a | a b c d`).
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian blur with reflect padding; `sigma == 0` is the identity.
pub fn gaussian_blur(image: &Image, sigma: f32) -> Image {
    if sigma <= 0.0 {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let shape = image.shape().clone();
    let mut cur: Vec<f64> = image.data().iter().map(|&v| v as f64).collect();
    let mut next = vec![0.0f64; cur.len()];
    let zyx = shape.zyx();
    let strides = shape.strides();
    let radius = (kernel.len() / 2) as i64;
    for axis in 0..3 {
        let n = zyx[axis];
        if n == 1 {
            continue;
        }
        for (idx, out) in next.iter_mut().enumerate() {
            let c = shape.coords(idx)[axis] as i64;
            let base = idx - c as usize * strides[axis];
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let src = reflect(c + j as i64 - radius, n);
                acc += w * cur[base + src * strides[axis]];
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Raster::from_vec(shape, cur.into_iter().map(|v| v as f32).collect()).expect("same shape")
}

/// Result of an Otsu split over a 256-bin histogram spanning `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtsuSplit {
    pub min: f32,
    pub max: f32,
    /// Last bin of the lower class; values in higher bins are foreground.
    pub bin: usize,
}

impl OtsuSplit {
    #[inline]
    pub fn bin_of(&self, v: f32) -> usize {
        histogram_bin(v, self.min, self.max)
    }

    /// Upper edge of the lower class, in value units.
    pub fn threshold(&self) -> f32 {
        let width = (self.max as f64 - self.min as f64) / OTSU_BINS as f64;
        (self.min as f64 + width * (self.bin + 1) as f64) as f32
    }

    pub fn is_foreground(&self, v: f32) -> bool {
        self.bin_of(v) > self.bin
    }
}

#[inline]
fn histogram_bin(v: f32, min: f32, max: f32) -> usize {
    let range = max as f64 - min as f64;
    if range <= 0.0 {
        return 0;
    }
    let b = ((v as f64 - min as f64) / range * OTSU_BINS as f64).floor();
    (b.max(0.0) as usize).min(OTSU_BINS - 1)
}

/// Otsu threshold maximizing between-class variance; ties resolve to the
/// lowest split. Returns `None` for empty or constant input.
pub fn otsu_threshold(values: &[f32]) -> Option<OtsuSplit> {
    let (min, max) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min < max) {
        return None;
    }
    let mut hist = [0u64; OTSU_BINS];
    for &v in values.iter().filter(|v| v.is_finite()) {
        hist[histogram_bin(v, min, max)] += 1;
    }
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0u64, 0.0f64);
    let mut best: Option<(f64, usize)> = None;
    for (k, &count) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += count;
        sum0 += k as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        // relative slack so float noise never beats the lower split on a tie
        match best {
            Some((b, _)) if between <= b + b.abs() * 1e-12 => {}
            _ => best = Some((between, k)),
        }
    }
    Some(OtsuSplit { min, max, bin: best.map_or(0, |b| b.1) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdStatus {
    Ok,
    /// The response was constant; the mask is all background.
    ConstantResponse,
}

#[derive(Clone, Debug)]
pub struct Foreground {
    pub mask: ForegroundMask,
    pub split: Option<OtsuSplit>,
    pub status: ThresholdStatus,
}

/// Difference of Gaussians thresholded with Otsu.
pub fn detect_foreground(image: &Image, sigma_low: f32, sigma_high: f32) -> Result<Foreground> {
    if !(sigma_low >= 0.0 && sigma_low < sigma_high) {
        return Err(Error::InvalidParam(format!(
            "need 0 <= sigma_low < sigma_high, got {sigma_low} and {sigma_high}"
        )));
    }
    let low = gaussian_blur(image, sigma_low);
    let high = gaussian_blur(image, sigma_high);
    let dog: Vec<f32> = low.data().iter().zip(high.data()).map(|(a, b)| a - b).collect();
    Ok(threshold_response(image.shape().clone(), &dog))
}

/// Otsu-threshold an arbitrary response; exposed for callers that build
/// their own response map.
pub fn threshold_response(shape: Shape, response: &[f32]) -> Foreground {
    match otsu_threshold(response) {
        Some(split) => {
            let mask = response.iter().map(|&v| split.is_foreground(v)).collect();
            Foreground {
                mask: Raster::from_vec(shape, mask).expect("same shape"),
                split: Some(split),
                status: ThresholdStatus::Ok,
            }
        }
        None => {
            log::warn!("constant foreground response, returning an empty mask");
            Foreground {
                mask: Raster::filled(shape, false),
                split: None,
                status: ThresholdStatus::ConstantResponse,
            }
        }
    }
}

/// Rescale to `[0, 1]` per frame; constant input maps to zeros.
pub fn minmax_normalize(image: &Image) -> Image {
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo < hi) {
        return image.map(|_| 0.0);
    }
    let range = hi as f64 - lo as f64;
    image.map(|&v| ((v as f64 - lo as f64) / range).clamp(0.0, 1.0) as f32)
}

/// Contours as the inverted, normalized Gaussian-blurred intensity.
pub fn intensity_to_contour(image: &Image, sigma: f32) -> Result<ContourMap> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParam(format!("contour sigma must be >= 0, got {sigma}")));
    }
    let blurred = gaussian_blur(image, sigma);
    let (lo, hi) = blurred
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo < hi) {
        return Ok(blurred.map(|_| 0.0));
    }
    Ok(minmax_normalize(&blurred).map(|&v| 1.0 - v))
}

/// Foreground is every labeled pixel; contour marks pixels that touch a
/// different label (background included) across a face.
pub fn labels_to_maps(labels: &LabelImage) -> (ForegroundMask, ContourMap) {
    let shape = labels.shape();
    let fg = labels.map(|&l| l > 0);
    let contour = (0..labels.len())
        .map(|i| {
            let l = labels[i];
            if shape.neighbors(i).any(|j| labels[j] != l) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (fg, Raster::from_vec(shape.clone(), contour).expect("same shape"))
}

/// Union of foregrounds, mean of contours.
pub fn ensemble_combine(maps: &[(ForegroundMask, ContourMap)]) -> Result<(ForegroundMask, ContourMap)> {
    let (fg0, c0) = maps
        .first()
        .ok_or_else(|| Error::InvalidParam("ensemble of zero sources".into()))?;
    let shape = fg0.shape().clone();
    for (i, (fg, c)) in maps.iter().enumerate() {
        ensure_same_shape(&shape, fg.shape(), &format!("ensemble foreground {i}"))?;
        ensure_same_shape(&shape, c.shape(), &format!("ensemble contour {i}"))?;
    }
    let mut fg = fg0.clone();
    let mut acc: Vec<f64> = c0.data().iter().map(|&v| v as f64).collect();
    for (f, c) in &maps[1..] {
        for (o, &v) in fg.data_mut().iter_mut().zip(f.data()) {
            *o |= v;
        }
        for (a, &v) in acc.iter_mut().zip(c.data()) {
            *a += v as f64;
        }
    }
    let n = maps.len() as f64;
    let contour = Raster::from_vec(shape, acc.into_iter().map(|v| (v / n) as f32).collect())?;
    Ok((fg, contour))
}
