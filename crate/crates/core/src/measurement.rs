//! Tumour diameter in pixels and centimetres.
//!
//! The automatic path takes the maximum Feret (caliper) diameter of the
//! largest segmented component; the manual path is the length of an
//! operator-placed line. Both convert to centimetres with a per-image
//! [`Calibration`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{BinaryMask, LabelMap, Raster};
use crate::imaging::RegionStats;

pub const DEFAULT_MIN_AREA: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("component is empty")]
    EmptyComponent,
    #[error("cm_per_pixel must be positive and finite, got {0}")]
    InvalidCalibration(f64),
    #[error("line endpoint ({x}, {y}) lies outside the {width}x{height} image")]
    LineOutOfBounds { x: f64, y: f64, width: usize, height: usize },
    #[error("label {0} does not exist")]
    UnknownLabel(u32),
}

/// Scale factor from pixels to centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Calibration {
    cm_per_pixel: f64,
}

impl Calibration {
    pub fn new(cm_per_pixel: f64) -> Result<Self, MeasureError> {
        if cm_per_pixel > 0.0 && cm_per_pixel.is_finite() {
            Ok(Self { cm_per_pixel })
        } else {
            Err(MeasureError::InvalidCalibration(cm_per_pixel))
        }
    }

    pub fn cm_per_pixel(&self) -> f64 {
        self.cm_per_pixel
    }
}

impl TryFrom<f64> for Calibration {
    type Error = MeasureError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Calibration> for f64 {
    fn from(c: Calibration) -> f64 {
        c.cm_per_pixel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Two-endpoint measuring line in image coordinates (pixel centres at integers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelLine {
    pub p1: Point,
    pub p2: Point,
}

impl PixelLine {
    pub fn new(p1: Point, p2: Point) -> Self {
        Self { p1, p2 }
    }

    /// Endpoints must lie within `[-0.5, width - 0.5] x [-0.5, height - 0.5]`.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<(), MeasureError> {
        for p in [self.p1, self.p2] {
            let inside = p.x.is_finite()
                && p.y.is_finite()
                && p.x >= -0.5
                && p.y >= -0.5
                && p.x <= width as f64 - 0.5
                && p.y <= height as f64 - 0.5;
            if !inside {
                return Err(MeasureError::LineOutOfBounds { x: p.x, y: p.y, width, height });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementMethod {
    Auto,
    Manual,
}

impl std::fmt::Display for MeasurementMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeasurementMethod::Auto => "auto",
            MeasurementMethod::Manual => "manual",
        })
    }
}

/// `cm == pixels * cm_per_pixel` for the calibration it was built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiameterMeasurement {
    pub pixels: f64,
    pub cm: f64,
    pub method: MeasurementMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_area_px: Option<usize>,
}

impl DiameterMeasurement {
    /// `None` means no lump was found: zero diameter.
    pub fn auto(component: Option<&TumorComponent>, cal: Calibration) -> Self {
        let (pixels, area) = component.map_or((0.0, 0), |c| (c.feret_px, c.area_px));
        Self { pixels, cm: pixels_to_cm(pixels, cal), method: MeasurementMethod::Auto, component_area_px: Some(area) }
    }

    pub fn manual(line: &PixelLine, cal: Calibration) -> Self {
        let pixels = manual_distance(line);
        Self { pixels, cm: pixels_to_cm(pixels, cal), method: MeasurementMethod::Manual, component_area_px: None }
    }

    /// Metres are derived on demand, never stored.
    pub fn meters(&self) -> f64 {
        self.cm / 100.0
    }
}

/// Label of the largest component with `area >= min_area`; ties go to the
/// smaller label.
pub fn select_tumor_component(stats: &[RegionStats], min_area: usize) -> Option<u32> {
    stats
        .iter()
        .filter(|s| s.area >= min_area)
        .min_by(|a, b| b.area.cmp(&a.area).then(a.label.cmp(&b.label)))
        .map(|s| s.label)
}

/// Maximum distance between any two foreground pixel centres.
pub fn feret_diameter(mask: &BinaryMask) -> Result<f64, MeasureError> {
    let (w, h) = (mask.width(), mask.height());
    let mut boundary: Vec<(i64, i64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if edge {
                boundary.push((x as i64, y as i64));
            }
        }
    }
    if boundary.is_empty() {
        return Err(MeasureError::EmptyComponent);
    }
    let hull = convex_hull(boundary);
    let mut best = 0i64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            let (dx, dy) = (a.0 - b.0, a.1 - b.1);
            best = best.max(dx * dx + dy * dy);
        }
    }
    Ok((best as f64).sqrt())
}

/// Andrew's monotone chain; collinear points dropped.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

pub fn manual_distance(line: &PixelLine) -> f64 {
    (line.p2.x - line.p1.x).hypot(line.p2.y - line.p1.y)
}

pub fn pixels_to_cm(pixels: f64, cal: Calibration) -> f64 {
    pixels * cal.cm_per_pixel
}

/// The component chosen for automatic measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TumorComponent {
    pub label: u32,
    pub area_px: usize,
    pub feret_px: f64,
}

/// Selects the tumour region and measures its Feret diameter.
pub fn measure_largest_component(
    labels: &LabelMap,
    stats: &[RegionStats],
    min_area: usize,
) -> Result<Option<TumorComponent>, MeasureError> {
    let Some(label) = select_tumor_component(stats, min_area) else {
        return Ok(None);
    };
    let area_px = stats.iter().find(|s| s.label == label).map(|s| s.area).ok_or(MeasureError::UnknownLabel(label))?;
    let feret_px = feret_diameter(&labels.region_mask(label))?;
    Ok(Some(TumorComponent { label, area_px, feret_px }))
}
