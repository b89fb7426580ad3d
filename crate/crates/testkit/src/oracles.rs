//! Slow reference implementations. Each one computes its answer by a
//! different route than the library: exhaustive search, sorting, all-pairs
//! scans or level-by-level simulation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use mammoseg_core::image::{BinaryMask, GrayImage, Raster, ScalarField};
use mammoseg_core::imaging::Histogram;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

fn neighbours(w: usize, h: usize, i: usize, offsets: &[(isize, isize)]) -> impl Iterator<Item = usize> + '_ {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    offsets.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize).then(|| ny as usize * w + nx as usize)
    })
}

/// Sorts the clamped window around each pixel and takes the middle element.
pub fn median(img: &GrayImage, window: usize) -> GrayImage {
    let r = (window / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let mut samples = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let sx = (x as isize + dx).clamp(0, w - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h - 1) as usize;
                samples.push(img.get(sx, sy));
            }
        }
        samples.sort_unstable();
        samples[samples.len() / 2]
    })
    .unwrap()
}

/// `w0 * w1 * (mu0 - mu1)^2` in exact rationals, recomputed from scratch for `t`.
pub fn between_class_variance(hist: &Histogram, t: usize) -> BigRational {
    let bins = hist.bins();
    let total: u64 = bins.iter().sum();
    let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u128, 0u64, 0u128);
    for (v, &c) in bins.iter().enumerate() {
        if v <= t {
            n0 += c;
            s0 += v as u128 * c as u128;
        } else {
            n1 += c;
            s1 += v as u128 * c as u128;
        }
    }
    if n0 == 0 || n1 == 0 {
        return BigRational::zero();
    }
    let r = |a: u128, b: u64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let w0 = r(n0 as u128, total);
    let w1 = r(n1 as u128, total);
    let mu0 = r(s0, n0);
    let mu1 = r(s1, n1);
    let d = mu0 - mu1;
    w0 * w1 * &d * &d
}

/// Exhaustive argmax over all 256 thresholds, smallest on ties.
pub fn otsu(hist: &Histogram) -> u8 {
    let mut best_t = 0usize;
    let mut best = between_class_variance(hist, 0);
    for t in 1..256 {
        let v = between_class_variance(hist, t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    best_t as u8
}

/// Squared distance to the nearest background pixel, scanning every
/// background pixel and every cell of the one-pixel frame around the image.
pub fn squared_distance(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut background: Vec<(i64, i64)> = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            let outside = x < 0 || y < 0 || x >= w || y >= h;
            if outside || !mask.get(x as usize, y as usize) {
                background.push((x, y));
            }
        }
    }
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                out.push(0);
                continue;
            }
            let best =
                background.iter().map(|&(bx, by)| ((bx - x) * (bx - x) + (by - y) * (by - y)) as u64).min().unwrap();
            out.push(best);
        }
    }
    out
}

/// Set of pixels reachable from `start` through foreground.
pub fn reachable(mask: &BinaryMask, start: usize, eight: bool) -> Vec<bool> {
    let (w, h) = (mask.width(), mask.height());
    let offsets: &[(isize, isize)] = if eight { &N8 } else { &N4 };
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for n in neighbours(w, h, i, offsets) {
            if mask.bits()[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Largest pairwise distance between foreground pixel centres.
pub fn feret(mask: &BinaryMask) -> f64 {
    let w = mask.width();
    let pts: Vec<(i64, i64)> =
        mask.bits().iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| ((i % w) as i64, (i / w) as i64)).collect();
    let mut best = 0i64;
    for a in &pts {
        for b in &pts {
            best = best.max((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2));
        }
    }
    (best as f64).sqrt()
}

/// Immersion simulation: for each field level in ascending order, labelled
/// regions grow in synchronous breadth-first rounds into unlabelled domain
/// pixels at or below that level. A pixel touching several regions takes the
/// label of its lowest labelled neighbour, the smaller label on ties.
pub fn seeded_growth(field: &ScalarField, domain: &BinaryMask, seeds: &[u32]) -> Vec<u32> {
    let (w, h) = (field.width(), field.height());
    let vals = field.values();
    let mut labels = seeds.to_vec();
    let mut levels: Vec<f64> = (0..w * h).filter(|&i| domain.bits()[i]).map(|i| vals[i]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    for level in levels {
        loop {
            let mut claims: Vec<(usize, u32)> = Vec::new();
            for i in 0..w * h {
                if !domain.bits()[i] || labels[i] != 0 || vals[i] > level {
                    continue;
                }
                let lowest = neighbours(w, h, i, &N8)
                    .filter(|&n| labels[n] != 0)
                    .min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(labels[a].cmp(&labels[b])));
                if let Some(n) = lowest {
                    claims.push((i, labels[n]));
                }
            }
            if claims.is_empty() {
                break;
            }
            for (i, l) in claims {
                labels[i] = l;
            }
        }
    }
    labels
}

/// h-minima markers from first principles. The filled surface is
/// `R(p) = min_q max(f(q) + h, B(q, p))`, where `B` is the minimax path
/// level between `q` and `p` inside the domain; markers are the connected
/// plateaus of `R` with no lower neighbour, numbered in raster order.
pub fn h_minima_markers(field: &ScalarField, domain: &BinaryMask, h: f64) -> Vec<u32> {
    let (w, ht) = (field.width(), field.height());
    let f = field.values();
    let inside = domain.bits();
    let n = w * ht;
    let mut filled = vec![f64::INFINITY; n];
    for q in (0..n).filter(|&q| inside[q]) {
        // Bottleneck Dijkstra from q.
        let mut best = vec![f64::INFINITY; n];
        best[q] = f[q];
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Key(f[q]), q)));
        while let Some(Reverse((Key(level), i))) = heap.pop() {
            if level > best[i] {
                continue;
            }
            for nb in neighbours(w, ht, i, &N8) {
                if !inside[nb] {
                    continue;
                }
                let cand = level.max(f[nb]);
                if cand < best[nb] {
                    best[nb] = cand;
                    heap.push(Reverse((Key(cand), nb)));
                }
            }
        }
        for p in 0..n {
            if inside[p] && best[p].is_finite() {
                filled[p] = filled[p].min((f[q] + h).max(best[p]));
            }
        }
    }

    let mut labels = vec![0u32; n];
    let mut seen = vec![false; n];
    let mut next = 0;
    for start in 0..n {
        if !inside[start] || seen[start] {
            continue;
        }
        let mut plateau = vec![start];
        seen[start] = true;
        let mut k = 0;
        while k < plateau.len() {
            let i = plateau[k];
            k += 1;
            for nb in neighbours(w, ht, i, &N8) {
                if inside[nb] && !seen[nb] && filled[nb] == filled[start] {
                    seen[nb] = true;
                    plateau.push(nb);
                }
            }
        }
        let lowest = plateau
            .iter()
            .flat_map(|&i| neighbours(w, ht, i, &N8))
            .all(|nb| !inside[nb] || filled[nb] >= filled[start]);
        if lowest {
            next += 1;
            for &i in &plateau {
                labels[i] = next;
            }
        }
    }
    labels
}

#[derive(Clone, Copy)]
struct Key(f64);
impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
