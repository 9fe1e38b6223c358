//! Binary PGM (P5) reading and writing, maxval 255.
//!
//! The writer emits a minimal header (`P5\n<w> <h>\n255\n`) followed by
//! row-major top-to-bottom pixel bytes; a save/load round trip is
//! byte-exact on the pixel payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::grid::{brightness_to_byte, byte_to_brightness, GridError, ImageGrid};

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("pgm format: {0}")]
    Format(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_err<T>(msg: impl Into<String>) -> Result<T, PgmError> {
    Err(PgmError::Format(msg.into()))
}

/// Encodes an image as binary PGM bytes.
pub fn encode_pgm(img: &ImageGrid) -> Result<Vec<u8>, PgmError> {
    let mut out = Vec::with_capacity(img.width() * img.height() + 32);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    for &v in img.values() {
        out.push(brightness_to_byte(v)?);
    }
    Ok(out)
}

pub fn save_pgm(img: &ImageGrid, path: impl AsRef<Path>) -> Result<(), PgmError> {
    let bytes = encode_pgm(img)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Decodes binary PGM bytes into an image. Accepts arbitrary whitespace
/// and `#` comments inside the header; requires maxval 255 and a complete
/// pixel payload.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid, PgmError> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return format_err("missing P5 magic");
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return format_err("truncated header"),
            }
        }
        let start = pos;
        while let Some(b) = bytes.get(pos) {
            if b.is_ascii_digit() {
                pos += 1;
            } else {
                break;
            }
        }
        if pos == start {
            return format_err("expected decimal header field");
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf-8");
        *field = text
            .parse()
            .map_err(|_| PgmError::Format(format!("bad header field {text:?}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return format_err(format!("maxval {maxval} unsupported, expected 255"));
    }
    if width == 0 || height == 0 {
        return format_err("zero image dimension");
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return format_err("missing whitespace before pixel data"),
    }
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return format_err(format!(
            "truncated payload: got {} of {expected} pixel bytes",
            payload.len()
        ));
    }
    if payload.len() > expected {
        return format_err(format!(
            "trailing data: got {} of {expected} pixel bytes",
            payload.len()
        ));
    }
    let mut values = Vec::with_capacity(expected);
    for &b in payload {
        values.push(byte_to_brightness(b as i64)?);
    }
    Ok(ImageGrid::from_values(width, height, values)?)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageGrid, PgmError> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes)
}
