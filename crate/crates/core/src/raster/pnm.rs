//! Binary PGM (P5) and PPM (P6) with maxval 255.
//!
//! The writer emits the canonical header `P5 <w> <h> 255\n` (or `P6`), so any
//! file in canonical form survives a read/write cycle byte for byte. The
//! reader also accepts comments and arbitrary whitespace between tokens.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Image, RasterError};

pub fn read_image(path: impl AsRef<Path>) -> Result<Image, RasterError> {
    let bytes = fs::read(path)?;
    decode_pnm(&bytes)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_pnm(img))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.is_gray() { "P5" } else { "P6" };
    let header = format!("{magic} {} {} 255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a [u8], RasterError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() {
            if self.buf[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(RasterError::MalformedHeader(format!("missing {what}")));
        }
        Ok(&self.buf[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, RasterError> {
        let tok = self.token(what)?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| {
                RasterError::MalformedHeader(format!(
                    "{what} is not a decimal integer: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image, RasterError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let channels = match cur.token("magic number")? {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(RasterError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(RasterError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(RasterError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(RasterError::MalformedHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    let expected = width * height * channels;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(RasterError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(RasterError::TrailingData(payload.len() - expected));
    }
    Image::new(width, height, channels, payload.to_vec())
}
