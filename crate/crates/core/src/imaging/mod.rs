//! Segmentation engine: denoising, thresholding, morphology, labelling,
//! distance transform and watershed.

mod components;
mod distance;
mod median;
mod morphology;
mod threshold;
mod watershed;

use thiserror::Error;

use crate::image::ShapeError;

pub use components::{connected_components, region_stats, BoundingBox, Connectivity, RegionStats};
pub use distance::{distance_transform, squared_distance_transform};
pub use median::{median_filter, DEFAULT_MEDIAN_WINDOW};
pub use morphology::{close, dilate, dilate_with_border, erode, erode_with_border, open, Border, StructuringElement};
pub use threshold::{binarize, histogram, otsu_threshold, Histogram};
pub use watershed::{fill_shallow_minima, find_markers, watershed, DEFAULT_H_MIN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImagingError {
    #[error("window size must be odd and positive, got {0}")]
    EvenWindow(usize),
    #[error("histogram has no samples")]
    EmptyHistogram,
    #[error("structuring element must contain the origin")]
    OriginMissing,
    #[error("unknown structuring element {0:?} (expected squareN, crossN or diskN)")]
    UnknownElement(String),
    #[error("connectivity must be 4 or 8, got {0}")]
    BadConnectivity(String),
    #[error("watershed needs at least one marker")]
    NoMarkers,
    #[error("marker pixel ({x}, {y}) lies outside the flood domain")]
    MarkerOutsideDomain { x: usize, y: usize },
    #[error("marker search domain is empty")]
    EmptyDomain,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Watershed split of a binary mask: flood the negated distance transform
/// from its h-minima, restricted to the foreground.
pub fn split_blobs(mask: &crate::image::BinaryMask, h: f64) -> Result<crate::image::LabelMap, ImagingError> {
    let surface = distance_transform(mask).negated();
    let markers = find_markers(&surface, mask, h)?;
    watershed(&surface, &markers, Some(mask))
}
