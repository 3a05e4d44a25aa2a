//! Minimal 8-bit grayscale PGM (binary `P5`) support.
//!
//! Only `maxval <= 255` rasters are accepted. Output is always written with a
//! single LF after each header token group so files are byte-identical across
//! platforms.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a binary PGM (expected magic P5)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("unsupported maxval {0}, only 8-bit rasters are handled")]
    UnsupportedMaxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    /// Wraps an existing buffer. Returns `None` if the length does not match.
    pub fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width * height).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode_pgm(bytes: &[u8]) -> Result<Self, PgmError> {
        let mut cursor = 0usize;
        let magic = next_token(bytes, &mut cursor).ok_or(PgmError::BadMagic)?;
        if magic != b"P5" {
            return Err(PgmError::BadMagic);
        }
        let mut header = [0u32; 3];
        for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
            let tok = next_token(bytes, &mut cursor)
                .ok_or_else(|| PgmError::Header(format!("missing {name}")))?;
            *slot = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| PgmError::Header(format!("invalid {name}")))?;
        }
        let [width, height, maxval] = header;
        if maxval == 0 || maxval > 255 {
            return Err(PgmError::UnsupportedMaxval(maxval));
        }
        // exactly one whitespace byte separates the header from the raster
        cursor += 1;
        let expected = width as usize * height as usize;
        let data = bytes.get(cursor..).unwrap_or(&[]);
        if data.len() < expected {
            return Err(PgmError::Truncated {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            width: width as usize,
            height: height as usize,
            pixels: data[..expected].to_vec(),
        })
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self, PgmError> {
        Self::decode_pgm(&fs::read(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), PgmError> {
        fs::write(path, self.encode_pgm())?;
        Ok(())
    }
}

fn next_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    (start < *cursor).then(|| &bytes[start..*cursor])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode() {
        let mut img = GrayImage::new(3, 2, 7);
        img.set(2, 1, 200);
        let bytes = img.encode_pgm();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(GrayImage::decode_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2]);
        let img = GrayImage::decode_pgm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[1, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            GrayImage::decode_pgm(b"P2\n1 1\n255\n0"),
            Err(PgmError::BadMagic)
        ));
        assert!(matches!(
            GrayImage::decode_pgm(b"P5\n4 4\n255\n\x00\x01"),
            Err(PgmError::Truncated { expected: 16, .. })
        ));
        assert!(matches!(
            GrayImage::decode_pgm(b"P5\n1 1\n65535\n\x00\x00"),
            Err(PgmError::UnsupportedMaxval(65535))
        ));
    }
}
