//! Binary erosion, dilation, opening and closing.
//!
//! Erosion tests `p + o` for every offset `o` of the structuring element;
//! dilation tests `p - o` (the reflected element). Pixels outside the image
//! take the value given by [`Border`]; the plain [`erode`] and [`dilate`] use
//! [`Border::Background`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::ImagingError;
use crate::image::{BinaryMask, Raster};

/// Value assumed for pixels outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    Background,
    Foreground,
}

impl Border {
    fn value(self) -> bool {
        matches!(self, Border::Foreground)
    }
}

impl std::ops::Not for Border {
    type Output = Border;
    fn not(self) -> Border {
        match self {
            Border::Background => Border::Foreground,
            Border::Foreground => Border::Background,
        }
    }
}

/// Set of `(dy, dx)` offsets; always contains the origin.
#[derive(Debug, Clone)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
    /// Short name such as `square3`, when built from one.
    name: Option<String>,
}

impl PartialEq for StructuringElement {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets
    }
}

impl Eq for StructuringElement {}

impl StructuringElement {
    pub fn new(offsets: impl IntoIterator<Item = (isize, isize)>) -> Result<Self, ImagingError> {
        let set: BTreeSet<_> = offsets.into_iter().collect();
        if !set.contains(&(0, 0)) {
            return Err(ImagingError::OriginMissing);
        }
        Ok(Self { offsets: set.into_iter().collect(), name: None })
    }

    fn named(mut self, name: String) -> Self {
        self.name = Some(name);
        self
    }

    /// Square of side `size` (odd).
    pub fn square(size: usize) -> Result<Self, ImagingError> {
        let r = odd_radius(size)?;
        Ok(Self::new((-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dy, dx))))?.named(format!("square{size}")))
    }

    /// Plus-shaped element of arm length `size / 2`.
    pub fn cross(size: usize) -> Result<Self, ImagingError> {
        let r = odd_radius(size)?;
        Ok(Self::new((-r..=r).map(|d| (d, 0)).chain((-r..=r).map(|d| (0, d))))?.named(format!("cross{size}")))
    }

    /// Digital disk `dy^2 + dx^2 <= radius^2`.
    pub fn disk(radius: usize) -> Self {
        let r = radius as isize;
        let offsets =
            (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dy, dx))).filter(|&(dy, dx)| dy * dy + dx * dx <= r * r);
        Self::new(offsets).expect("disk contains origin").named(format!("disk{radius}"))
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    /// Negates every offset.
    pub fn reflect(&self) -> Self {
        Self::new(self.offsets.iter().map(|&(dy, dx)| (-dy, -dx))).expect("origin preserved")
    }
}

impl Default for StructuringElement {
    /// 3x3 square.
    fn default() -> Self {
        Self::square(3).expect("3 is odd")
    }
}

fn odd_radius(size: usize) -> Result<isize, ImagingError> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(ImagingError::EvenWindow(size));
    }
    Ok((size / 2) as isize)
}

/// Textual names used on the command line: `square3`, `cross5`, `disk2`.
impl FromStr for StructuringElement {
    type Err = ImagingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (kind, num) = s.split_at(split);
        let n: usize = num.parse().map_err(|_| ImagingError::UnknownElement(s.to_string()))?;
        match kind {
            "square" => Self::square(n),
            "cross" => Self::cross(n),
            "disk" => Ok(Self::disk(n)),
            _ => Err(ImagingError::UnknownElement(s.to_string())),
        }
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(name) = &self.name {
            return f.write_str(name);
        }
        let parts: Vec<String> = self.offsets.iter().map(|(dy, dx)| format!("({dy},{dx})")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

fn probe(mask: &BinaryMask, x: usize, y: usize, dy: isize, dx: isize, border: Border) -> bool {
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    if nx < 0 || ny < 0 || nx >= mask.width() as isize || ny >= mask.height() as isize {
        border.value()
    } else {
        mask.get(nx as usize, ny as usize)
    }
}

pub fn erode_with_border(mask: &BinaryMask, se: &StructuringElement, border: Border) -> BinaryMask {
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        se.offsets.iter().all(|&(dy, dx)| probe(mask, x, y, dy, dx, border))
    })
    .expect("same shape")
}

pub fn dilate_with_border(mask: &BinaryMask, se: &StructuringElement, border: Border) -> BinaryMask {
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        se.offsets.iter().any(|&(dy, dx)| probe(mask, x, y, -dy, -dx, border))
    })
    .expect("same shape")
}

/// True where every offset lands on foreground; outside counts as background.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_with_border(mask, se, Border::Background)
}

/// True where any reflected offset lands on foreground; growth is clipped at the border.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate_with_border(mask, se, Border::Background)
}

/// Erosion followed by dilation. Removes specks smaller than the element.
pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

/// Dilation followed by erosion. Fills pits smaller than the element.
///
/// The erosion step treats the outside as foreground so that foreground
/// touching the image edge is kept (`mask ⊆ close(mask)`).
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode_with_border(&dilate(mask, se), se, Border::Foreground)
}
