//! Raster containers shared by every pipeline stage.
//!
//! All rasters are row-major with index `y * width + x`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("raster dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("raster has {actual} samples, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("field value at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("labels are not dense: label {missing} is unused but {max} is present")]
    SparseLabels { missing: u32, max: u32 },
    #[error("raster shapes differ: {0}x{1} vs {2}x{3}")]
    Mismatch(usize, usize, usize, usize),
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<(), ShapeError> {
    if width == 0 || height == 0 {
        return Err(ShapeError::ZeroDimension { width, height });
    }
    let expected = width * height;
    if len != expected {
        return Err(ShapeError::LengthMismatch { expected, actual: len });
    }
    Ok(())
}

/// Implemented by every raster so shape checks can be written once.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    fn len(&self) -> usize {
        self.width() * self.height()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn same_shape<R: Raster>(&self, other: &R) -> Result<(), ShapeError> {
        if self.width() == other.width() && self.height() == other.height() {
            Ok(())
        } else {
            Err(ShapeError::Mismatch(self.width(), self.height(), other.width(), other.height()))
        }
    }
}

macro_rules! impl_raster {
    ($ty:ty) => {
        impl Raster for $ty {
            fn width(&self) -> usize {
                self.width
            }
            fn height(&self) -> usize {
                self.height
            }
        }
    };
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl_raster!(GrayImage);

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ShapeError> {
        check_shape(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ShapeError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, ShapeError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }
}

/// Foreground/background mask; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl_raster!(BinaryMask);

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ShapeError> {
        check_shape(width, height, bits.len())?;
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self, ShapeError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self, ShapeError> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    /// Nonzero pixels become foreground.
    pub fn from_image(img: &GrayImage) -> Self {
        Self { width: img.width, height: img.height, bits: img.pixels.iter().map(|&v| v != 0).collect() }
    }

    /// Foreground as 255, background as 0.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> Self {
        Self { width: self.width, height: self.height, bits: self.bits.iter().map(|&b| !b).collect() }
    }

    /// True if every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Integer region labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    num_labels: u32,
}

impl_raster!(LabelMap);

impl LabelMap {
    /// Rejects label sets that are not exactly `{1..K}`.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, ShapeError> {
        check_shape(width, height, labels.len())?;
        let max = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; max as usize + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = (1..=max).find(|&l| !seen[l as usize]) {
            return Err(ShapeError::SparseLabels { missing, max });
        }
        Ok(Self { width, height, labels, num_labels: max })
    }

    /// Caller guarantees density.
    pub(crate) fn from_dense(width: usize, height: usize, labels: Vec<u32>, num_labels: u32) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        Self { width, height, labels, num_labels }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// K, the largest label.
    pub fn num_labels(&self) -> u32 {
        self.num_labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn region_mask(&self, label: u32) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, bits: self.labels.iter().map(|&l| l == label).collect() }
    }

    pub fn foreground(&self) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, bits: self.labels.iter().map(|&l| l != 0).collect() }
    }

    /// Label values as intensities, saturating at 255.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.labels.iter().map(|&l| l.min(255) as u8).collect(),
        }
    }
}

/// Real-valued raster, finite everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl_raster!(ScalarField);

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ShapeError> {
        check_shape(width, height, values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ShapeError::NonFinite { index });
        }
        Ok(Self { width, height, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, ShapeError> {
        Self::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `-self`, the surface flooded when splitting blobs.
    pub fn negated(&self) -> Self {
        Self { width: self.width, height: self.height, values: self.values.iter().map(|&v| -v).collect() }
    }
}

/// 4- or 8-neighbourhood offsets as `(dx, dy)`.
pub(crate) const NEIGHBOURS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
pub(crate) const NEIGHBOURS_8: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Index of `(x + dx, y + dy)` if it lies inside a `width x height` grid.
#[inline]
pub(crate) fn offset_index(width: usize, height: usize, x: usize, y: usize, dx: isize, dy: isize) -> Option<usize> {
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
        None
    } else {
        Some(ny as usize * width + nx as usize)
    }
}
