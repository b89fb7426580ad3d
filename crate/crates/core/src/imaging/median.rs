//! Square-window median filter with edge replication.
//!
//! Uses a sliding 256-bin histogram per row and tracks the running median, so
//! the cost per pixel is O(window) rather than O(window^2 log window).

use super::ImagingError;
use crate::image::{GrayImage, Raster};

pub const DEFAULT_MEDIAN_WINDOW: usize = 3;

pub fn median_filter(img: &GrayImage, window: usize) -> Result<GrayImage, ImagingError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(ImagingError::EvenWindow(window));
    }
    let (w, h) = (img.width(), img.height());
    let r = (window / 2) as isize;
    let rank = window * window / 2;
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;

    let mut out = Vec::with_capacity(w * h);
    let mut hist = [0usize; 256];
    for y in 0..h {
        hist.fill(0);
        let rows: Vec<usize> = (-r..=r).map(|dy| clamp_y(y as isize + dy)).collect();
        for dx in -r..=r {
            let sx = clamp_x(dx);
            for &sy in &rows {
                hist[img.get(sx, sy) as usize] += 1;
            }
        }

        let mut median = 0usize;
        let mut below = 0usize;
        seek(&hist, rank, &mut median, &mut below);
        out.push(median as u8);

        for x in 1..w {
            let leaving = clamp_x(x as isize - r - 1);
            let entering = clamp_x(x as isize + r);
            for &sy in &rows {
                let v = img.get(leaving, sy) as usize;
                hist[v] -= 1;
                if v < median {
                    below -= 1;
                }
                let v = img.get(entering, sy) as usize;
                hist[v] += 1;
                if v < median {
                    below += 1;
                }
            }
            seek(&hist, rank, &mut median, &mut below);
            out.push(median as u8);
        }
    }
    Ok(GrayImage::new(w, h, out).expect("same shape as input"))
}

/// Move `median` until `below <= rank < below + hist[median]`, where `below`
/// counts samples strictly less than `median`.
#[inline]
fn seek(hist: &[usize; 256], rank: usize, median: &mut usize, below: &mut usize) {
    while *below > rank {
        *median -= 1;
        *below -= hist[*median];
    }
    while *below + hist[*median] <= rank {
        *below += hist[*median];
        *median += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removes_single_impulse() {
        let mut img = GrayImage::filled(3, 3, 0).unwrap();
        img.set(1, 1, 255);
        let out = median_filter(&img, 3).unwrap();
        assert_eq!(out.get(1, 1), 0);
        assert!(out.pixels().iter().all(|&v| v == 0));
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(5, 4, 77).unwrap();
        for window in [1, 3, 5, 7, 9] {
            assert_eq!(median_filter(&img, window).unwrap(), img);
        }
    }

    #[test]
    fn window_one_is_identity() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x * 31 + y * 7) as u8).unwrap();
        assert_eq!(median_filter(&img, 1).unwrap(), img);
    }

    #[test]
    fn even_or_zero_window_rejected() {
        let img = GrayImage::filled(2, 2, 0).unwrap();
        assert_eq!(median_filter(&img, 4), Err(ImagingError::EvenWindow(4)));
        assert_eq!(median_filter(&img, 0), Err(ImagingError::EvenWindow(0)));
    }

    #[test]
    fn edge_replication_at_corner() {
        // Corner (0,0) of a 3x3 window sees 4 copies of (0,0), 2 of (1,0), 2 of (0,1), 1 of (1,1).
        let img = GrayImage::new(2, 2, vec![200, 0, 0, 0]).unwrap();
        assert_eq!(median_filter(&img, 3).unwrap().get(0, 0), 0);
        let img = GrayImage::new(2, 2, vec![200, 200, 0, 0]).unwrap();
        assert_eq!(median_filter(&img, 3).unwrap().get(0, 0), 200);
    }

    #[test]
    fn window_larger_than_image() {
        let img = GrayImage::new(2, 1, vec![1, 9]).unwrap();
        // 7x7 window around x=0 sees 4 columns of 1 and 3 columns of 9 (times 7 rows).
        let out = median_filter(&img, 7).unwrap();
        assert_eq!(out.pixels(), &[1, 9]);
    }
}
