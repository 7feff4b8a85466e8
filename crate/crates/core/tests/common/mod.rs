//! Synthetic clips and reference measurements shared by the integration
//! tests.

#![allow(dead_code)]

use ivca_core::video_io::{ChromaFormat, LumaPlane, VideoSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn spec(width: usize, height: usize) -> VideoSpec {
    VideoSpec::new(width, height, ChromaFormat::C420).unwrap()
}

/// Smooth random texture: a few random plane waves under a slowly varying
/// amplitude envelope, centred on mid-gray.
pub fn texture(width: usize, height: usize, amplitude: f64, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0.01..0.4),
                rng.gen_range(0.01..0.4),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.3..1.0),
            )
        })
        .collect();
    let (ex, ey) = (rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0));
    let total: f64 = waves.iter().map(|w| w.3).sum();
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 / width as f64, y as f64 / height as f64);
            let envelope = 0.25 + 0.75 * ((ex * fx * std::f64::consts::TAU).sin() * (ey * fy * std::f64::consts::PI).sin()).abs();
            let v: f64 = waves
                .iter()
                .map(|&(kx, ky, ph, a)| a * (kx * x as f64 + ky * y as f64 + ph).sin())
                .sum::<f64>()
                / total;
            out.push((128.0 + amplitude * envelope * v).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Cyclic shift of a row-major image by `dx` pixels to the right.
pub fn shift_right(samples: &[u8], width: usize, dx: usize) -> Vec<u8> {
    let mut out = vec![0u8; samples.len()];
    for (src, dst) in samples.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        for x in 0..width {
            dst[(x + dx) % width] = src[x];
        }
    }
    out
}

/// Cyclic shift down by `dy` rows.
pub fn shift_down(samples: &[u8], width: usize, dy: usize) -> Vec<u8> {
    let height = samples.len() / width;
    let mut out = vec![0u8; samples.len()];
    for y in 0..height {
        let dst = (y + dy) % height;
        out[dst * width..(dst + 1) * width].copy_from_slice(&samples[y * width..(y + 1) * width]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Content {
    /// One texture repeated.
    Static,
    /// Fresh uniform noise every frame.
    Noise,
    /// Texture moving right by `px` pixels per frame (cyclic).
    Translate { px: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SynthClip {
    pub content: Content,
    pub width: usize,
    pub height: usize,
    pub frames: u64,
    pub amplitude: f64,
    pub seed: u64,
}

impl SynthClip {
    pub fn frames(&self) -> impl Iterator<Item = LumaPlane> + '_ {
        let spec = spec(self.width, self.height);
        let base = texture(self.width, self.height, self.amplitude, self.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let clip = *self;
        (0..clip.frames).map(move |p| {
            let samples = match clip.content {
                Content::Static => base.clone(),
                Content::Translate { px } => shift_right(&base, clip.width, (px * p as usize) % clip.width),
                Content::Noise => (0..clip.width * clip.height)
                    .map(|_| (128.0 + rng.gen_range(-1.0..1.0) * clip.amplitude).round().clamp(0.0, 255.0) as u8)
                    .collect(),
            };
            LumaPlane::new(spec, samples, p).unwrap()
        })
    }

    pub fn planes(&self) -> Vec<LumaPlane> {
        self.frames().collect()
    }
}

/// Mean squared residual between `cur` and `prev` displaced by `(dx, dy)`,
/// over the overlapping region, sampling every `stride`-th pixel.
fn shifted_residual(cur: &LumaPlane, prev: &LumaPlane, dx: i64, dy: i64, stride: usize) -> f64 {
    let (w, h) = (cur.width() as i64, cur.height() as i64);
    let (mut acc, mut n) = (0.0, 0u64);
    for y in (0..h).step_by(stride) {
        let sy = y - dy;
        if sy < 0 || sy >= h {
            continue;
        }
        for x in (0..w).step_by(stride) {
            let sx = x - dx;
            if sx < 0 || sx >= w {
                continue;
            }
            let d = cur.at(x as usize, y as usize) as f64 - prev.at(sx as usize, sy as usize) as f64;
            acc += d * d;
            n += 1;
        }
    }
    if n == 0 {
        f64::INFINITY
    } else {
        acc / n as f64
    }
}

/// Proxy bitrate: mean over inter frames of the pixel-domain residual energy
/// left after the best global shift against the previous frame. Shifts are
/// searched on a `step`-pixel lattice within `±range_x` by `±range_y`.
pub fn proxy_bitrate(planes: &[LumaPlane], range_x: i64, range_y: i64, step: i64) -> f64 {
    let mut total = 0.0;
    for pair in planes.windows(2) {
        let mut best = f64::INFINITY;
        let mut dy = -range_y;
        while dy <= range_y {
            let mut dx = -range_x;
            while dx <= range_x {
                best = best.min(shifted_residual(&pair[1], &pair[0], dx, dy, 2));
                dx += step;
            }
            dy += step;
        }
        total += best;
    }
    total / (planes.len() - 1).max(1) as f64
}
