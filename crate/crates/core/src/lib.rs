//! Video complexity analysis from DCT texture energy.
//!
//! The pipeline reads luma planes ([`video_io`]), turns each frame into a
//! per-block energy map ([`energy`]), compares maps across frames
//! ([`temporal`], [`motion`]) according to a hierarchical GOP model
//! ([`gop`]) and reduces the per-frame features into one sequence-level
//! complexity value ([`aggregate`]). [`eval`] and [`heatmap`] hold the
//! evaluation tooling used to correlate that value with encoder bitrate.

pub mod aggregate;
pub mod energy;
pub mod error;
pub mod eval;
pub mod gop;
pub mod heatmap;
pub mod motion;
pub mod pipeline;
pub mod temporal;
pub mod video_io;

pub use error::{Error, Result};
