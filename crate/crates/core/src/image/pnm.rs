//! Binary PGM (P5) / PPM (P6) with maxval 255.
//!
//! The writer emits the canonical form `P5\n<w> <h>\n255\n<payload>`. The
//! reader accepts any whitespace between header tokens and skips `#`
//! comments, then expects exactly one whitespace byte before the payload.

use super::Image;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("unsupported magic number (only binary P5/P6 are accepted)")]
    BadMagic,
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u64),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u64, PnmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::MalformedHeader(what));
        }
        // at most 20 digits fit a u64; longer runs are rejected by parse
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PnmError::MalformedHeader(what))
    }
}

pub fn read_pnm(bytes: &[u8]) -> Result<Image, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(PnmError::BadMagic),
    };
    let mut h = Header { bytes, pos: 2 };
    if !h.bytes.get(2).is_some_and(|c| c.is_ascii_whitespace() || *c == b'#') {
        return Err(PnmError::MalformedHeader("missing separator after magic"));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader("zero dimension"));
    }
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    match h.bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(PnmError::MalformedHeader("missing separator before payload")),
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(PnmError::MalformedHeader("dimensions overflow"))?;
    let payload = &bytes[h.pos..];
    if payload.len() < expected {
        return Err(PnmError::Truncated { expected, found: payload.len() });
    }
    Ok(Image::new(width as usize, height as usize, channels, payload[..expected].to_vec())
        .expect("header-validated dimensions"))
}

pub fn write_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.is_gray() { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}
