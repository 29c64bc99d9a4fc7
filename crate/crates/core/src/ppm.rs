//! Binary PPM (P6, maxval 255) codec.

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Parses a P6 file. Comments (`#` to end of line) are allowed in the header.
pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    if cursor.token()? != b"P6" {
        return Err(Error::parse("ppm", "missing P6 magic"));
    }
    let width = cursor.number()?;
    let height = cursor.number()?;
    let maxval = cursor.number()?;
    if maxval != 255 {
        return Err(Error::parse("ppm", format!("maxval {maxval} is not 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::parse("ppm", "header not terminated by whitespace")),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(3))
        .ok_or_else(|| Error::parse("ppm", "dimensions overflow"))?;
    let body = &bytes[cursor.pos..];
    if body.len() < needed {
        return Err(Error::parse(
            "ppm",
            format!("raster truncated: need {needed} bytes, have {}", body.len()),
        ));
    }
    RasterImage::rgb(width, height, body[..needed].to_vec())
        .map_err(|e| Error::parse("ppm", e.to_string()))
}

pub fn encode(image: &RasterImage) -> Result<Vec<u8>> {
    if image.channels() != 3 {
        return Err(Error::Channels(image.channels()));
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    Ok(out)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space(&mut self) {
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

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse("ppm", "truncated header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        if tok.len() > 9 || !tok.iter().all(u8::is_ascii_digit) {
            return Err(Error::parse("ppm", "bad header number"));
        }
        let v: usize = std::str::from_utf8(tok).unwrap().parse().unwrap();
        if v == 0 {
            return Err(Error::parse("ppm", "zero header value"));
        }
        Ok(v)
    }
}
