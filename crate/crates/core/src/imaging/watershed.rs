//! Marker-controlled watershed by priority flooding, and marker extraction by
//! h-minima suppression.
//!
//! Both work on a [`ScalarField`] restricted to a domain mask with
//! 8-connectivity. For blob splitting the field is the negated distance
//! transform of the foreground, so basins sit at blob centres.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::ImagingError;
use crate::image::{offset_index, BinaryMask, LabelMap, Raster, ScalarField, NEIGHBOURS_8};

pub const DEFAULT_H_MIN: f64 = 1.0;

/// Min-heap entry: lower level first, then earlier insertion.
#[derive(Debug, Clone, Copy)]
struct Entry {
    level: f64,
    seq: u64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.level.total_cmp(&self.level).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct FloodQueue {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl FloodQueue {
    fn push(&mut self, level: f64, index: usize) {
        self.heap.push(Entry { level, seq: self.seq, index });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Entry> {
        self.heap.pop()
    }
}

fn domain_bits(field: &ScalarField, domain: Option<&BinaryMask>) -> Result<Vec<bool>, ImagingError> {
    match domain {
        Some(d) => {
            field.same_shape(d)?;
            Ok(d.bits().to_vec())
        }
        None => Ok(vec![true; field.len()]),
    }
}

/// Floods `field` upward from the marker basins. Every unlabelled domain pixel
/// takes the label of the first basin to reach it; equal levels are served
/// in insertion order. Pixels outside `domain` (default: whole image) stay 0.
pub fn watershed(
    field: &ScalarField,
    markers: &LabelMap,
    domain: Option<&BinaryMask>,
) -> Result<LabelMap, ImagingError> {
    field.same_shape(markers)?;
    if markers.num_labels() == 0 {
        return Err(ImagingError::NoMarkers);
    }
    let inside = domain_bits(field, domain)?;
    let (w, h) = (field.width(), field.height());
    let values = field.values();
    let mut labels = markers.labels().to_vec();

    let mut queue = FloodQueue::default();
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            if !inside[i] {
                return Err(ImagingError::MarkerOutsideDomain { x: i % w, y: i / w });
            }
            queue.push(values[i], i);
        }
    }

    while let Some(Entry { index, .. }) = queue.pop() {
        let (x, y) = (index % w, index / w);
        let label = labels[index];
        for &(dx, dy) in &NEIGHBOURS_8 {
            if let Some(n) = offset_index(w, h, x, y, dx, dy) {
                if inside[n] && labels[n] == 0 {
                    labels[n] = label;
                    queue.push(values[n], n);
                }
            }
        }
    }

    Ok(LabelMap::from_dense(w, h, labels, markers.num_labels()))
}

/// Morphological reconstruction by erosion of `field + h` over `field`,
/// restricted to the domain. Minima shallower than `h` are filled up to their
/// spill level; outside the domain the field is returned unchanged.
pub fn fill_shallow_minima(field: &ScalarField, domain: &[bool], h: f64) -> Vec<f64> {
    let (w, ht) = (field.width(), field.height());
    let f = field.values();
    let mut rec: Vec<f64> = f.iter().zip(domain).map(|(&v, &d)| if d { v + h } else { v }).collect();

    let mut queue = FloodQueue::default();
    for (i, &d) in domain.iter().enumerate() {
        if d {
            queue.push(rec[i], i);
        }
    }
    while let Some(Entry { level, index, .. }) = queue.pop() {
        if level != rec[index] {
            continue;
        }
        let (x, y) = (index % w, index / w);
        for &(dx, dy) in &NEIGHBOURS_8 {
            if let Some(n) = offset_index(w, ht, x, y, dx, dy) {
                if domain[n] {
                    let candidate = level.max(f[n]);
                    if candidate < rec[n] {
                        rec[n] = candidate;
                        queue.push(candidate, n);
                    }
                }
            }
        }
    }
    rec
}

/// Labels connected plateaus of `values` (within `domain`) that have no
/// lower domain neighbour, in raster order of each plateau's first pixel.
pub(crate) fn regional_minima(width: usize, height: usize, values: &[f64], domain: &[bool]) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; width * height];
    let mut visited = vec![false; width * height];
    let mut next = 0u32;
    let mut plateau = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..width * height {
        if !domain[start] || visited[start] {
            continue;
        }
        let level = values[start];
        let mut is_minimum = true;
        plateau.clear();
        visited[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            plateau.push(i);
            let (x, y) = (i % width, i / width);
            for &(dx, dy) in &NEIGHBOURS_8 {
                if let Some(n) = offset_index(width, height, x, y, dx, dy) {
                    if !domain[n] {
                        continue;
                    }
                    if values[n] < level {
                        is_minimum = false;
                    } else if values[n] == level && !visited[n] {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        if is_minimum {
            next += 1;
            for &i in &plateau {
                labels[i] = next;
            }
        }
    }
    (labels, next)
}

/// Watershed seeds: regional minima of the field after suppressing minima
/// whose depth is below `h`.
pub fn find_markers(field: &ScalarField, domain: &BinaryMask, h: f64) -> Result<LabelMap, ImagingError> {
    field.same_shape(domain)?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(ImagingError::InvalidParameter(format!("h must be finite and >= 0, got {h}")));
    }
    if domain.count() == 0 {
        return Err(ImagingError::EmptyDomain);
    }
    let filled = fill_shallow_minima(field, domain.bits(), h);
    let (labels, k) = regional_minima(field.width(), field.height(), &filled, domain.bits());
    Ok(LabelMap::from_dense(field.width(), field.height(), labels, k))
}
