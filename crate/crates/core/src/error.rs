use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("malformed y4m header: {0}")]
    Y4mHeader(String),

    #[error("unsupported y4m colorspace tag `C{0}`")]
    UnsupportedColorspace(String),

    #[error("truncated frame payload at frame {frame}: expected {expected} bytes, got {got}")]
    TruncatedFrame {
        frame: u64,
        expected: usize,
        got: usize,
    },

    #[error("raw file size {file_size} bytes is not a multiple of the frame size {frame_size} bytes")]
    FrameSizeMismatch { file_size: u64, frame_size: usize },

    #[error("invalid video geometry: {0}")]
    InvalidSpec(String),

    #[error("invalid block size {0}: must be a power of two >= 4")]
    InvalidBlockSize(usize),

    #[error("block size {block} exceeds both frame dimensions {width}x{height}")]
    BlockTooLarge {
        block: usize,
        width: usize,
        height: usize,
    },

    #[error("block grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("block index {index} out of range for {count} blocks")]
    BlockIndex { index: usize, count: usize },

    #[error("similarity out of [0, 1]: s_hor = {s_hor}, s_ver = {s_ver}")]
    SimilarityRange { s_hor: f64, s_ver: f64 },

    #[error("invalid motion-estimation parameters: {0}")]
    InvalidMeParams(String),

    #[error("invalid GOP structure: {0}")]
    InvalidGop(String),

    #[error("frame {0} is intra coded and has no reference")]
    IntraHasNoReference(u64),

    #[error("inter frame {0} has no temporal feature")]
    MissingTemporal(u64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("constant series: correlation undefined")]
    ConstantSeries,

    #[error("every weight tuple on the grid yields a constant complexity")]
    DegenerateGrid,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("bitrate for clip `{clip}` must be positive, got {bitrate}")]
    InvalidBitrate { clip: String, bitrate: f64 },

    #[error("clips without a matching report: {0:?}")]
    UnmatchedClips(Vec<String>),

    #[error("malformed pgm: {0}")]
    Pgm(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
