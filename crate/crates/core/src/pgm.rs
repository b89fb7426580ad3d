//! Binary PGM (`P5`) codec, 8-bit only.
//!
//! The reader accepts `#` comments wherever header whitespace is allowed. The
//! writer always emits the canonical header `P5\n<w> <h>\n255\n` with no
//! comments, so `read_pgm(&write_pgm(img)) == img`.

use thiserror::Error;

use crate::image::{GrayImage, Raster};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("not a binary PGM file (expected magic \"P5\")")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("PGM raster truncated: expected {expected} bytes, found {actual}")]
    TruncatedRaster { expected: usize, actual: usize },
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::BadHeader(format!("expected numeric {what}")));
        }
        // Digits only, so from_utf8 cannot fail; overflow can.
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::BadHeader(format!("{what} out of range")))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if !bytes.starts_with(b"P5") {
        return Err(PgmError::BadMagic);
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    // Magic must be followed by whitespace or a comment, not e.g. "P55".
    match bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        _ => return Err(PgmError::BadMagic),
    }

    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::BadHeader(format!("maxval {maxval} not in 1..=255")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(PgmError::BadHeader("missing whitespace after maxval".into())),
        None => return Err(PgmError::TruncatedRaster { expected: width.saturating_mul(height), actual: 0 }),
    }

    let expected = width.checked_mul(height).ok_or_else(|| PgmError::BadHeader("dimensions overflow".into()))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(PgmError::TruncatedRaster { expected, actual: raster.len() });
    }
    GrayImage::new(width, height, raster[..expected].to_vec()).map_err(|e| PgmError::BadHeader(e.to_string()))
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}
