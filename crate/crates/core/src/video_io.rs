//! Y4M and raw planar YUV ingest.
//!
//! Only the luma plane is kept; chroma payloads are read past. Frames are
//! partitioned into a square block grid whose edge blocks are padded by
//! replicating the last column and row.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_HEADER_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChromaFormat {
    #[serde(rename = "420")]
    C420,
    #[serde(rename = "422")]
    C422,
    #[serde(rename = "444")]
    C444,
}

impl ChromaFormat {
    /// Bytes occupied by both chroma planes of an 8-bit frame.
    pub fn chroma_bytes(self, width: usize, height: usize) -> usize {
        let (cw, ch) = match self {
            ChromaFormat::C420 => (width.div_ceil(2), height.div_ceil(2)),
            ChromaFormat::C422 => (width.div_ceil(2), height),
            ChromaFormat::C444 => (width, height),
        };
        2 * cw * ch
    }
}

impl std::str::FromStr for ChromaFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "420" | "i420" | "yuv420p" => Ok(ChromaFormat::C420),
            "422" | "i422" | "yuv422p" => Ok(ChromaFormat::C422),
            "444" | "i444" | "yuv444p" => Ok(ChromaFormat::C444),
            other => Err(Error::InvalidSpec(format!("unknown chroma format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    /// Informational only.
    pub frame_rate: f64,
    pub bit_depth: u8,
    pub chroma_format: ChromaFormat,
}

impl VideoSpec {
    pub fn new(width: usize, height: usize, chroma_format: ChromaFormat) -> Result<Self> {
        let spec = VideoSpec {
            width,
            height,
            frame_rate: 0.0,
            bit_depth: 8,
            chroma_format,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_frame_rate(mut self, frame_rate: f64) -> Self {
        self.frame_rate = frame_rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec(format!(
                "dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.bit_depth != 8 {
            return Err(Error::InvalidSpec(format!(
                "only 8-bit video is supported, got {} bits",
                self.bit_depth
            )));
        }
        Ok(())
    }

    pub fn luma_bytes(&self) -> usize {
        self.width * self.height
    }

    pub fn frame_bytes(&self) -> usize {
        self.luma_bytes() + self.chroma_format.chroma_bytes(self.width, self.height)
    }
}

/// One frame's 8-bit luma samples in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaPlane {
    pub spec: VideoSpec,
    samples: Vec<u8>,
    /// Display order (POC).
    pub frame_index: u64,
}

impl LumaPlane {
    pub fn new(spec: VideoSpec, samples: Vec<u8>, frame_index: u64) -> Result<Self> {
        spec.validate()?;
        if samples.len() != spec.luma_bytes() {
            return Err(Error::InvalidSpec(format!(
                "plane holds {} samples, {}x{} needs {}",
                samples.len(),
                spec.width,
                spec.height,
                spec.luma_bytes()
            )));
        }
        Ok(LumaPlane {
            spec,
            samples,
            frame_index,
        })
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.spec.width + x]
    }

    pub fn partition(&self, block_size: usize) -> Result<Partition<'_>> {
        let grid = BlockGrid::new(self.width(), self.height(), block_size)?;
        Ok(Partition { plane: self, grid })
    }
}

/// Geometry of the square block tiling of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub block_size: usize,
    pub blocks_per_row: usize,
    pub blocks_per_col: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_size: usize) -> Result<Self> {
        if block_size < 4 || !block_size.is_power_of_two() {
            return Err(Error::InvalidBlockSize(block_size));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidSpec(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if block_size > width && block_size > height {
            return Err(Error::BlockTooLarge {
                block: block_size,
                width,
                height,
            });
        }
        Ok(BlockGrid {
            block_size,
            blocks_per_row: width.div_ceil(block_size),
            blocks_per_col: height.div_ceil(block_size),
        })
    }

    pub fn block_count(&self) -> usize {
        self.blocks_per_row * self.blocks_per_col
    }

    /// Pixels covered by the padded grid, `B * w * w`.
    pub fn padded_pixels(&self) -> usize {
        self.block_count() * self.block_size * self.block_size
    }

    /// `(column, row)` of block `k` in raster order.
    #[inline]
    pub fn position(&self, k: usize) -> (usize, usize) {
        (k % self.blocks_per_row, k / self.blocks_per_row)
    }
}

impl std::fmt::Display for BlockGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{} blocks of {}x{}",
            self.blocks_per_row, self.blocks_per_col, self.block_size, self.block_size
        )
    }
}

/// A plane viewed through its block grid.
#[derive(Debug, Clone, Copy)]
pub struct Partition<'a> {
    plane: &'a LumaPlane,
    pub grid: BlockGrid,
}

impl<'a> Partition<'a> {
    pub fn plane(&self) -> &'a LumaPlane {
        self.plane
    }

    /// Copies block `k` into `out` (length `w * w`, row-major), replicating
    /// the last in-bounds column and row where the block leaves the frame.
    pub fn tile_into<T: From<u8>>(&self, k: usize, out: &mut [T]) {
        let w = self.grid.block_size;
        assert_eq!(out.len(), w * w, "tile buffer must hold w*w samples");
        assert!(k < self.grid.block_count(), "block index {k} out of range");
        let (bx, by) = self.grid.position(k);
        let (width, height) = (self.plane.width(), self.plane.height());
        let samples = self.plane.samples();
        for ty in 0..w {
            let y = (by * w + ty).min(height - 1);
            let row = &samples[y * width..(y + 1) * width];
            for tx in 0..w {
                let x = (bx * w + tx).min(width - 1);
                out[ty * w + tx] = T::from(row[x]);
            }
        }
    }

    pub fn tile(&self, k: usize) -> Vec<u8> {
        let w = self.grid.block_size;
        let mut out = vec![0u8; w * w];
        self.tile_into(k, &mut out);
        out
    }
}

/// Streaming YUV4MPEG2 reader yielding luma planes in display order.
pub struct Y4mReader<R> {
    inner: R,
    spec: VideoSpec,
    next_index: u64,
    chroma_scratch: Vec<u8>,
    done: bool,
}

impl Y4mReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Y4mReader::new(BufReader::new(file))
    }
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let line = read_line(&mut inner)?
            .ok_or_else(|| Error::Y4mHeader("empty input".into()))?;
        let spec = parse_y4m_header(&line)?;
        Ok(Y4mReader {
            inner,
            spec,
            next_index: 0,
            chroma_scratch: vec![0; spec.chroma_format.chroma_bytes(spec.width, spec.height)],
            done: false,
        })
    }

    pub fn spec(&self) -> VideoSpec {
        self.spec
    }

    fn read_frame(&mut self) -> Result<Option<LumaPlane>> {
        let frame = self.next_index;
        let expected = self.spec.frame_bytes();
        let line = match read_line(&mut self.inner) {
            Ok(Some(line)) => line,
            Ok(None) => return Ok(None),
            Err(Error::Y4mHeader(_)) => {
                return Err(Error::TruncatedFrame {
                    frame,
                    expected,
                    got: 0,
                })
            }
            Err(e) => return Err(e),
        };
        if line != "FRAME" && !line.starts_with("FRAME ") {
            return Err(Error::Y4mHeader(format!(
                "expected FRAME marker before frame {frame}, found `{}`",
                truncate_for_message(&line)
            )));
        }
        let mut luma = vec![0u8; self.spec.luma_bytes()];
        let got = read_full(&mut self.inner, &mut luma)?;
        if got < luma.len() {
            return Err(Error::TruncatedFrame {
                frame,
                expected,
                got,
            });
        }
        let chroma_got = read_full(&mut self.inner, &mut self.chroma_scratch)?;
        if chroma_got < self.chroma_scratch.len() {
            return Err(Error::TruncatedFrame {
                frame,
                expected,
                got: got + chroma_got,
            });
        }
        self.next_index += 1;
        LumaPlane::new(self.spec, luma, frame).map(Some)
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<LumaPlane>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.read_frame();
        if !matches!(item, Ok(Some(_))) {
            self.done = true;
        }
        item.transpose()
    }
}

/// Opens a Y4M file, returning its header geometry and a frame stream.
pub fn open_y4m(path: impl AsRef<Path>) -> Result<(VideoSpec, Y4mReader<BufReader<File>>)> {
    let reader = Y4mReader::open(path)?;
    Ok((reader.spec(), reader))
}

pub fn parse_y4m_header(line: &str) -> Result<VideoSpec> {
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(Error::Y4mHeader("missing YUV4MPEG2 signature".into()));
    }
    let (mut width, mut height) = (None, None);
    let mut frame_rate = 0.0;
    let mut chroma = ChromaFormat::C420;
    for token in tokens {
        let (tag, value) = token.split_at(1);
        match tag {
            "W" => width = Some(parse_dim(value, "W")?),
            "H" => height = Some(parse_dim(value, "H")?),
            "F" => frame_rate = parse_rate(value)?,
            "C" => {
                chroma = match value {
                    "420" | "420jpeg" | "420mpeg2" | "420paldv" => ChromaFormat::C420,
                    "422" => ChromaFormat::C422,
                    "444" => ChromaFormat::C444,
                    other => return Err(Error::UnsupportedColorspace(other.to_string())),
                }
            }
            // interlacing, aspect ratio and extensions carry nothing we use
            "I" | "A" | "X" => {}
            _ => {
                return Err(Error::Y4mHeader(format!(
                    "unknown header parameter `{}`",
                    truncate_for_message(token)
                )))
            }
        }
    }
    let width = width.ok_or_else(|| Error::Y4mHeader("missing W parameter".into()))?;
    let height = height.ok_or_else(|| Error::Y4mHeader("missing H parameter".into()))?;
    Ok(VideoSpec::new(width, height, chroma)?.with_frame_rate(frame_rate))
}

fn parse_dim(value: &str, tag: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Y4mHeader(format!("bad {tag} value `{value}`"))),
    }
}

fn parse_rate(value: &str) -> Result<f64> {
    let bad = || Error::Y4mHeader(format!("bad F value `{value}`"));
    let (num, den) = value.split_once(':').ok_or_else(bad)?;
    let num: u64 = num.parse().map_err(|_| bad())?;
    let den: u64 = den.parse().map_err(|_| bad())?;
    if den == 0 {
        return Err(bad());
    }
    Ok(num as f64 / den as f64)
}

fn truncate_for_message(s: &str) -> &str {
    match s.char_indices().nth(32) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Reads one `\n`-terminated ASCII line. `Ok(None)` on clean EOF; a line cut
/// off by EOF or exceeding the length limit is a header error.
fn read_line<R: BufRead>(reader: &mut R) -> Result<Option<String>> {
    let mut buf = Vec::new();
    let n = reader
        .by_ref()
        .take(MAX_HEADER_LEN as u64)
        .read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        return Err(Error::Y4mHeader("unterminated line".into()));
    }
    buf.pop();
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| Error::Y4mHeader("non-ASCII header line".into()))
}

/// Like `read_exact` but reports how many bytes arrived before EOF.
fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

/// Headerless planar YUV reader.
pub struct RawYuvReader<R> {
    inner: R,
    spec: VideoSpec,
    remaining: u64,
    next_index: u64,
    chroma_scratch: Vec<u8>,
}

impl<R: Read> RawYuvReader<R> {
    /// `frames` is the number of whole frames the source holds.
    pub fn new(inner: R, spec: VideoSpec, frames: u64) -> Result<Self> {
        spec.validate()?;
        Ok(RawYuvReader {
            inner,
            spec,
            remaining: frames,
            next_index: 0,
            chroma_scratch: vec![0; spec.chroma_format.chroma_bytes(spec.width, spec.height)],
        })
    }

    pub fn frame_count(&self) -> u64 {
        self.next_index + self.remaining
    }

    fn read_frame(&mut self) -> Result<LumaPlane> {
        let frame = self.next_index;
        let mut luma = vec![0u8; self.spec.luma_bytes()];
        let got = read_full(&mut self.inner, &mut luma)?;
        let chroma_got = if got == luma.len() {
            read_full(&mut self.inner, &mut self.chroma_scratch)?
        } else {
            0
        };
        if got + chroma_got < self.spec.frame_bytes() {
            return Err(Error::TruncatedFrame {
                frame,
                expected: self.spec.frame_bytes(),
                got: got + chroma_got,
            });
        }
        self.next_index += 1;
        self.remaining -= 1;
        LumaPlane::new(self.spec, luma, frame)
    }
}

impl<R: Read> Iterator for RawYuvReader<R> {
    type Item = Result<LumaPlane>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let item = self.read_frame();
        if item.is_err() {
            self.remaining = 0;
        }
        Some(item)
    }
}

pub fn open_raw_yuv(path: impl AsRef<Path>, spec: VideoSpec) -> Result<RawYuvReader<BufReader<File>>> {
    let path = path.as_ref();
    spec.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_size = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let frame_size = spec.frame_bytes();
    if file_size % frame_size as u64 != 0 {
        return Err(Error::FrameSizeMismatch {
            file_size,
            frame_size,
        });
    }
    RawYuvReader::new(BufReader::new(file), spec, file_size / frame_size as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn y4m_bytes(header: &str, frames: usize, frame_bytes: usize) -> Vec<u8> {
        let mut out = format!("{header}\n").into_bytes();
        for f in 0..frames {
            out.extend_from_slice(b"FRAME\n");
            out.extend((0..frame_bytes).map(|i| ((i + f * 7) % 251) as u8));
        }
        out
    }

    #[test]
    fn minimal_header() {
        let data = y4m_bytes("YUV4MPEG2 W64 H64 F30:1 C420", 1, 6144);
        let reader = Y4mReader::new(Cursor::new(data)).unwrap();
        let spec = reader.spec();
        assert_eq!((spec.width, spec.height, spec.bit_depth), (64, 64, 8));
        assert_eq!(spec.frame_rate, 30.0);
        assert_eq!(spec.chroma_format, ChromaFormat::C420);
        let planes: Vec<_> = reader.collect::<Result<_>>().unwrap();
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].samples().len(), 4096);
    }

    #[test]
    fn frame_count_preserved() {
        let data = y4m_bytes("YUV4MPEG2 W16 H8 F25:1 C444 Ip A1:1", 3, 16 * 8 * 3);
        let planes: Vec<_> = Y4mReader::new(Cursor::new(data))
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(planes.len(), 3);
        let idx: Vec<u64> = planes.iter().map(|p| p.frame_index).collect();
        assert_eq!(idx, [0, 1, 2]);
        // luma of frame 1 starts at offset 7 in our generator
        assert_eq!(planes[1].samples()[0], 7);
    }

    #[test]
    fn truncated_mid_frame_names_frame() {
        let mut data = y4m_bytes("YUV4MPEG2 W64 H64 F30:1 C420", 3, 6144);
        data.truncate(data.len() - 100);
        let results: Vec<_> = Y4mReader::new(Cursor::new(data)).unwrap().collect();
        assert_eq!(results.len(), 3);
        assert!(results[0].is_ok() && results[1].is_ok());
        match &results[2] {
            Err(Error::TruncatedFrame { frame, .. }) => assert_eq!(*frame, 2),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_inside_luma() {
        let mut data = y4m_bytes("YUV4MPEG2 W64 H64 F30:1 C420", 2, 6144);
        data.truncate(data.len() - 5000);
        let err = Y4mReader::new(Cursor::new(data))
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::TruncatedFrame { frame: 1, .. }));
        assert!(err.to_string().contains("frame 1"));
    }

    #[test]
    fn colorspaces() {
        for (tag, fmt) in [
            ("C420jpeg", ChromaFormat::C420),
            ("C420mpeg2", ChromaFormat::C420),
            ("C422", ChromaFormat::C422),
            ("C444", ChromaFormat::C444),
        ] {
            let spec = parse_y4m_header(&format!("YUV4MPEG2 W8 H8 F1:1 {tag}")).unwrap();
            assert_eq!(spec.chroma_format, fmt);
        }
        let err = parse_y4m_header("YUV4MPEG2 W8 H8 F1:1 C420p10").unwrap_err();
        assert!(matches!(err, Error::UnsupportedColorspace(_)));
        let err = parse_y4m_header("YUV4MPEG2 W8 H8 Cmono").unwrap_err();
        assert!(matches!(err, Error::UnsupportedColorspace(_)));
    }

    #[test]
    fn malformed_headers() {
        for bad in [
            "YUV4MPEG W8 H8",
            "YUV4MPEG2 H8",
            "YUV4MPEG2 W0 H8",
            "YUV4MPEG2 W8 H8 F30",
            "YUV4MPEG2 W8 H8 Q1",
        ] {
            assert!(
                matches!(parse_y4m_header(bad), Err(Error::Y4mHeader(_))),
                "{bad}"
            );
        }
        assert!(Y4mReader::new(Cursor::new(Vec::new())).is_err());
    }

    #[test]
    fn frame_marker_with_params() {
        let mut data = b"YUV4MPEG2 W4 H4 C444\n".to_vec();
        data.extend_from_slice(b"FRAME Ip\n");
        data.extend(std::iter::repeat_n(9u8, 48));
        let planes: Vec<_> = Y4mReader::new(Cursor::new(data))
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(planes[0].samples(), &[9u8; 16]);
    }

    #[test]
    fn frame_sizes() {
        let spec = VideoSpec::new(64, 64, ChromaFormat::C420).unwrap();
        assert_eq!(spec.frame_bytes(), 6144);
        let odd = VideoSpec::new(5, 3, ChromaFormat::C420).unwrap();
        assert_eq!(odd.frame_bytes(), 15 + 2 * 3 * 2);
        assert!(VideoSpec::new(0, 4, ChromaFormat::C444).is_err());
    }

    #[test]
    fn raw_frames_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = VideoSpec::new(64, 64, ChromaFormat::C420).unwrap();

        let three = dir.path().join("three.yuv");
        std::fs::write(&three, vec![1u8; 18432]).unwrap();
        let planes: Vec<_> = open_raw_yuv(&three, spec)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(planes.len(), 3);

        let empty = dir.path().join("empty.yuv");
        std::fs::write(&empty, b"").unwrap();
        assert_eq!(open_raw_yuv(&empty, spec).unwrap().count(), 0);

        let off = dir.path().join("off.yuv");
        std::fs::write(&off, vec![0u8; 6145]).unwrap();
        let err = open_raw_yuv(&off, spec).err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains("6145") && msg.contains("6144"), "{msg}");

        let missing = open_raw_yuv(dir.path().join("nope.yuv"), spec).err().unwrap();
        assert!(missing.to_string().contains("nope.yuv"));
    }

    #[test]
    fn grid_geometry() {
        let g = BlockGrid::new(64, 64, 32).unwrap();
        assert_eq!((g.blocks_per_row, g.blocks_per_col, g.block_count()), (2, 2, 4));
        let g = BlockGrid::new(100, 60, 32).unwrap();
        assert_eq!((g.blocks_per_row, g.blocks_per_col, g.block_count()), (4, 2, 8));
        assert!(matches!(
            BlockGrid::new(16, 16, 32),
            Err(Error::BlockTooLarge { .. })
        ));
        // one dimension large enough is fine
        assert!(BlockGrid::new(64, 16, 32).is_ok());
        for bad in [0, 2, 12, 33] {
            assert!(matches!(
                BlockGrid::new(64, 64, bad),
                Err(Error::InvalidBlockSize(_))
            ));
        }
    }

    #[test]
    fn padded_tile_of_constant_frame() {
        let spec = VideoSpec::new(100, 60, ChromaFormat::C420).unwrap();
        let plane = LumaPlane::new(spec, vec![77; 6000], 0).unwrap();
        let part = plane.partition(32).unwrap();
        let last = part.tile(part.grid.block_count() - 1);
        assert!(last.iter().all(|&v| v == 77));
    }

    #[test]
    fn padding_replicates_edges() {
        let spec = VideoSpec::new(6, 5, ChromaFormat::C444).unwrap();
        let samples: Vec<u8> = (0..30).collect();
        let plane = LumaPlane::new(spec, samples, 0).unwrap();
        let part = plane.partition(4).unwrap();
        // block (1, 1) covers x 4..8, y 4..8; only (4,4) and (5,4) are in bounds
        let tile = part.tile(3);
        for ty in 0..4 {
            for tx in 0..4 {
                let x = (4 + tx).min(5);
                assert_eq!(tile[ty * 4 + tx], plane.at(x, 4));
            }
        }
    }
}
