//! Per-block heatmaps written as binary PGM, one pixel per block.

use std::io::Write;
use std::path::Path;

use crate::video_io::BlockGrid;
use crate::{Error, Result};

/// Min-max scales `values` to 0..=255; constant input maps to 128.
pub fn scale_to_gray(values: &[f64]) -> Vec<u8> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() || max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return vec![128; values.len()];
    }
    let span = max - min;
    values
        .iter()
        .map(|&v| ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Writes `values` (raster order over `grid`) as a P5 image.
pub fn emit_heatmap(values: &[f64], grid: &BlockGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != grid.block_count() {
        return Err(Error::InvalidSpec(format!(
            "heatmap has {} values for {}",
            values.len(),
            grid
        )));
    }
    let bytes = encode_pgm(grid.blocks_per_row, grid.blocks_per_col, &scale_to_gray(values));
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Parses a binary PGM with maxval 255 into `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Pgm("header ended early".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Pgm("non-ASCII header".into()))?);
    }
    if fields[0] != "P5" {
        return Err(Error::Pgm(format!("expected P5, found {}", fields[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Pgm(format!("bad number `{s}`")));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).unwrap_or_default();
    if data.len() != width * height {
        return Err(Error::Pgm(format!(
            "raster holds {} bytes, expected {}",
            data.len(),
            width * height
        )));
    }
    Ok((width, height, data.to_vec()))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    decode_pgm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
