use std::collections::VecDeque;

use crate::grid::{ForegroundMask, LabelImage, Raster};

/// Face-connected components, labeled `1..=n` in raster order of their
/// first pixel.
pub fn connected_components(mask: &ForegroundMask) -> LabelImage {
    let shape = mask.shape();
    let mut labels = Raster::filled(shape.clone(), 0u32);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in shape.neighbors(p) {
                if mask[q] && labels[q] == 0 {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }
    labels
}

/// Pixel lists per component (index `i` holds label `i + 1`), each sorted.
pub fn component_pixels(labels: &LabelImage) -> Vec<Vec<usize>> {
    let n = labels.data().iter().copied().max().unwrap_or(0) as usize;
    let mut out = vec![Vec::new(); n];
    for (i, &l) in labels.data().iter().enumerate() {
        if l > 0 {
            out[l as usize - 1].push(i);
        }
    }
    out
}
