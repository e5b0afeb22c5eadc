use std::collections::BinaryHeap;

/// Static 3-d tree over points, queried for nearest neighbors within a radius.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    ids: Vec<u32>,
    /// Implicit balanced layout: the median of `lo..hi` sits at the midpoint.
    axes: Vec<u8>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    d2: f64,
    id: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        build_rec(points, &mut order, &mut axes);
        KdTree {
            points: order.iter().map(|&i| points[i as usize]).collect(),
            ids: order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Up to `k` points within `radius` of `q`, ordered by squared distance
    /// then id. Returns `(id, squared distance)`.
    pub fn nearest(&self, q: [f64; 3], k: usize, radius: f64) -> Vec<(u32, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, self.len(), q, k, radius * radius, &mut heap);
        let mut out: Vec<Entry> = heap.into_vec();
        out.sort();
        out.into_iter().map(|e| (e.id, e.d2)).collect()
    }

    fn search(&self, lo: usize, hi: usize, q: [f64; 3], k: usize, r2: f64, heap: &mut BinaryHeap<Entry>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d2 = (0..3).map(|a| (p[a] - q[a]).powi(2)).sum::<f64>();
        if d2 <= r2 {
            let e = Entry { d2, id: self.ids[mid] };
            if heap.len() < k {
                heap.push(e);
            } else if e < *heap.peek().unwrap() {
                heap.pop();
                heap.push(e);
            }
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, q, k, r2, heap);
        let plane = diff * diff;
        let bound = if heap.len() < k { r2 } else { heap.peek().unwrap().d2.min(r2) };
        if plane <= bound {
            self.search(far.0, far.1, q, k, r2, heap);
        }
    }
}

fn build_rec(points: &[[f64; 3]], order: &mut [u32], axes: &mut [u8]) {
    if order.is_empty() {
        return;
    }
    // split on the axis of largest spread
    let mut axis = 0;
    let mut best = -1.0;
    for a in 0..3 {
        let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = points[i as usize][a];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > best {
            best = hi - lo;
            axis = a;
        }
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a as usize][axis].total_cmp(&points[b as usize][axis]));
    axes[mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (laxes, raxes) = axes.split_at_mut(mid);
    build_rec(points, left, laxes);
    build_rec(points, &mut rest[1..], &mut raxes[1..]);
}
