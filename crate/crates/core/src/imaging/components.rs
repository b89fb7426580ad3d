//! Connected-component labelling and per-region statistics.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::image::{offset_index, BinaryMask, LabelMap, Raster, NEIGHBOURS_4, NEIGHBOURS_8};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &NEIGHBOURS_4,
            Connectivity::Eight => &NEIGHBOURS_8,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = ImagingError;
    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(ImagingError::BadConnectivity(other.to_string())),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl FromStr for Connectivity {
    type Err = ImagingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u8>().map_err(|_| ImagingError::BadConnectivity(s.to_string())).and_then(Connectivity::try_from)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub label: u32,
    pub area: usize,
    pub bbox: BoundingBox,
    /// Mean pixel-centre position `(x, y)`.
    pub centroid: (f64, f64),
}

/// Labels foreground components in raster order of first encounter.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> (LabelMap, Vec<RegionStats>) {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();

    for start in 0..w * h {
        if !bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            for &(dx, dy) in connectivity.offsets() {
                if let Some(n) = offset_index(w, h, x, y, dx, dy) {
                    if bits[n] && labels[n] == 0 {
                        labels[n] = next;
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    let map = LabelMap::from_dense(w, h, labels, next);
    let stats = region_stats(&map);
    (map, stats)
}

/// Area, bounding box and centroid for labels `1..=K`, in label order.
pub fn region_stats(labels: &LabelMap) -> Vec<RegionStats> {
    let k = labels.num_labels() as usize;
    let w = labels.width();
    let mut area = vec![0usize; k];
    let mut sum = vec![(0u64, 0u64); k];
    let mut bbox = vec![BoundingBox { min_x: usize::MAX, min_y: usize::MAX, max_x: 0, max_y: 0 }; k];
    for (i, &l) in labels.labels().iter().enumerate() {
        if l == 0 {
            continue;
        }
        let j = l as usize - 1;
        let (x, y) = (i % w, i / w);
        area[j] += 1;
        sum[j].0 += x as u64;
        sum[j].1 += y as u64;
        let b = &mut bbox[j];
        b.min_x = b.min_x.min(x);
        b.min_y = b.min_y.min(y);
        b.max_x = b.max_x.max(x);
        b.max_y = b.max_y.max(y);
    }
    (0..k)
        .map(|j| RegionStats {
            label: j as u32 + 1,
            area: area[j],
            bbox: bbox[j],
            centroid: (sum[j].0 as f64 / area[j] as f64, sum[j].1 as f64 / area[j] as f64),
        })
        .collect()
}
