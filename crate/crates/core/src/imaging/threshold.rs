//! Intensity histograms and global Otsu thresholding.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::image::{BinaryMask, GrayImage, Raster};

/// 256-bin intensity histogram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram {
    #[serde(with = "bins_serde")]
    bins: [u64; 256],
}

mod bins_serde {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bins: &[u64; 256], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(bins.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u64; 256], D::Error> {
        let v = Vec::<u64>::deserialize(d)?;
        let n = v.len();
        v.try_into().map_err(|_| D::Error::custom(format!("histogram needs 256 bins, got {n}")))
    }
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        Self { bins }
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

impl Default for Histogram {
    fn default() -> Self {
        Self { bins: [0; 256] }
    }
}

pub fn histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &v in img.pixels() {
        bins[v as usize] += 1;
    }
    Histogram { bins }
}

/// Between-class variance up to the positive factor `1 / N^2`, kept as the
/// exact fraction `D^2 / (n0 * n1)` with `D = N * S0 - n0 * S`.
struct SplitScore {
    num: BigUint,
    den: BigUint,
}

impl SplitScore {
    fn zero() -> Self {
        Self { num: BigUint::ZERO, den: BigUint::from(1u8) }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

/// Otsu's threshold: the `t` maximising between-class variance with class 0
/// being intensities `<= t`. Ties go to the smallest `t`; splits with an empty
/// class score zero.
pub fn otsu_threshold(hist: &Histogram) -> Result<u8, ImagingError> {
    let total = hist.total();
    if total == 0 {
        return Err(ImagingError::EmptyHistogram);
    }
    let total_sum: u128 = hist.bins.iter().enumerate().map(|(v, &c)| v as u128 * c as u128).sum();
    let big_total = BigInt::from(total);
    let big_sum = BigInt::from(total_sum);

    let mut best_t = 0u8;
    let mut best = SplitScore::zero();
    let mut n0: u64 = 0;
    let mut s0: u128 = 0;
    for t in 0..=255usize {
        n0 += hist.bins[t];
        s0 += t as u128 * hist.bins[t] as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = &big_total * BigInt::from(s0) - BigInt::from(n0) * &big_sum;
        let score = SplitScore { num: d.magnitude().pow(2), den: BigUint::from(n0) * BigUint::from(n1) };
        if score.cmp(&best) == Ordering::Greater {
            best = score;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// Foreground where intensity `> t`, or `<= t` when `invert` is set.
pub fn binarize(img: &GrayImage, t: u8, invert: bool) -> BinaryMask {
    let bits = img.pixels().iter().map(|&v| (v > t) != invert).collect();
    BinaryMask::new(img.width(), img.height(), bits).expect("shape taken from a valid image")
}
