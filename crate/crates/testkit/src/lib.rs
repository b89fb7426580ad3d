//! Test support: reference oracles, random inputs and synthetic phantoms.

pub mod oracles;

use mammoseg_core::image::{BinaryMask, GrayImage, Raster};
use mammoseg_core::imaging::{Histogram, StructuringElement};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random()).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density)).unwrap()
}

/// Random element inside a 5x5 box, always containing the origin.
pub fn random_se(rng: &mut impl Rng) -> StructuringElement {
    let mut offsets = vec![(0, 0)];
    for dy in -2..=2isize {
        for dx in -2..=2isize {
            if rng.random_bool(0.3) {
                offsets.push((dy, dx));
            }
        }
    }
    StructuringElement::new(offsets).unwrap()
}

/// Mix of sparse, dense, spiky and single-bin histograms.
pub fn random_histogram(rng: &mut impl Rng, case: usize) -> Histogram {
    let mut bins = [0u64; 256];
    match case % 5 {
        0 => bins[rng.random_range(0..256)] = rng.random_range(1..1000),
        1 => {
            for b in bins.iter_mut() {
                *b = rng.random_range(0..50);
            }
        }
        2 => {
            for _ in 0..rng.random_range(2..6) {
                bins[rng.random_range(0..256)] += rng.random_range(1..20);
            }
        }
        3 => {
            // Two noisy modes.
            let (a, b) = (rng.random_range(20..100), rng.random_range(140..230));
            for _ in 0..2000 {
                let centre = if rng.random_bool(0.6) { a } else { b };
                let v = (centre as i64 + rng.random_range(-15..=15)).clamp(0, 255);
                bins[v as usize] += 1;
            }
        }
        _ => {
            for b in bins.iter_mut() {
                if rng.random_bool(0.1) {
                    *b = rng.random_range(1..4);
                }
            }
            if bins.iter().all(|&b| b == 0) {
                bins[128] = 1;
            }
        }
    }
    Histogram::from_bins(bins)
}

/// Foreground where `(x - cx)^2 + (y - cy)^2 <= r^2`.
pub fn disk_mask(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx * dx + dy * dy <= r * r
    })
    .unwrap()
}

/// Union of two disks of radius `r` whose centres are `sep` apart horizontally.
pub fn two_disk_mask(r: f64, sep: f64) -> BinaryMask {
    let margin = 3.0;
    let w = (2.0 * r + sep + 2.0 * margin).ceil() as usize + 1;
    let h = (2.0 * r + 2.0 * margin).ceil() as usize + 1;
    let cy = (h / 2) as f64;
    let c1 = r + margin;
    let c2 = c1 + sep;
    let a = disk_mask(w, h, c1, cy, r);
    let b = disk_mask(w, h, c2, cy, r);
    BinaryMask::new(w, h, a.bits().iter().zip(b.bits()).map(|(&p, &q)| p || q).collect()).unwrap()
}

/// The end-to-end phantom: bright disk on a dark background.
pub fn disk_phantom(size: usize, radius: f64, background: u8, foreground: u8) -> GrayImage {
    let c = (size / 2) as f64;
    let m = disk_mask(size, size, c, c, radius);
    GrayImage::from_fn(size, size, |x, y| if m.get(x, y) { foreground } else { background }).unwrap()
}

/// Replaces a `fraction` of pixels with 0 or 255 (equal odds).
pub fn salt_and_pepper(img: &GrayImage, fraction: f64, rng: &mut impl Rng) -> GrayImage {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if rng.random_bool(fraction) {
                out.set(x, y, if rng.random_bool(0.5) { 255 } else { 0 });
            }
        }
    }
    out
}
