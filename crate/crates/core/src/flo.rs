//! Middlebury `.flo` container: `"PIEH"` magic (the f32 202021.25), i32
//! width and height, then row-major interleaved `(u, v)` f32 values, all
//! little-endian.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;

/// Writes `flow` and returns the byte count, `12 + 8 * w * h`.
pub fn write_flo<W: Write>(flow: &FlowField, mut sink: W) -> Result<usize> {
    let (w, h) = (flow.width(), flow.height());
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * w * h);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(w as i32).to_le_bytes());
    buf.extend_from_slice(&(h as i32).to_le_bytes());
    for [u, v] in flow.data() {
        buf.extend_from_slice(&(*u as f32).to_le_bytes());
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

pub fn read_flo<R: Read>(mut source: R) -> Result<FlowField> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse_flo(&bytes)
}

fn word(bytes: &[u8], at: usize) -> [u8; 4] {
    bytes[at..at + 4].try_into().expect("4 bytes")
}

pub fn parse_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(Error::FloLength {
            width: 0,
            height: 0,
            expected: 0,
            found: bytes.len(),
        });
    }
    let magic = f32::from_le_bytes(word(bytes, 0));
    if magic != FLO_MAGIC {
        return Err(Error::FloMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::FloLength {
            width: 0,
            height: 0,
            expected: 0,
            found: bytes.len() - 4,
        });
    }
    let width = i32::from_le_bytes(word(bytes, 4));
    let height = i32::from_le_bytes(word(bytes, 8));
    if width <= 0 || height <= 0 {
        return Err(Error::InvalidParameter(format!(".flo dimensions {width}x{height} must be positive")));
    }
    let (w, h) = (width as usize, height as usize);
    let expected = 8 * w * h;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::FloLength {
            width,
            height,
            expected,
            found: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| {
            [
                f64::from(f32::from_le_bytes(word(c, 0))),
                f64::from(f32::from_le_bytes(word(c, 4))),
            ]
        })
        .collect();
    FlowField::from_vec(w, h, data)
}
