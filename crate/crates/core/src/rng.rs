//! Seed splitting and counter-addressed Gaussian increments.
//!
//! Every random stream is derived from one master seed by [`split`], a
//! SplitMix64-style mix folded over a list of integer tags
//! (e.g. `[TAG_REPLICA, r]`). Brownian increments are addressed by
//! `(seed, agent, step)`: the agent selects the ChaCha stream and the step
//! selects the word offset, so any increment can be regenerated on its own.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TAG_INITIAL: u64 = 0x1;
pub const TAG_REFERENCE: u64 = 0x2;
pub const TAG_REPLICA: u64 = 0x3;
pub const TAG_NOISE: u64 = 0x4;
pub const TAG_PROJECTIONS: u64 = 0x5;
pub const TAG_JOB: u64 = 0x6;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `master` for the tag path `tags`.
pub fn split(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0xA076_1D64_78BD_642F))))
}

/// Generator for a derived stream.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split(master, tags))
}

/// Standard normal pair from two 64-bit words (Box–Muller).
#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) as f64 + 1.0) * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Brownian increments `ΔW ~ N(0, dt I_d)` addressed by `(agent, step)`.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub seed: u64,
    pub dim: usize,
    pub dt: f64,
    base: ChaCha8Rng,
    sqrt_dt: f64,
}

impl NoisePath {
    pub fn new(seed: u64, dim: usize, dt: f64) -> Self {
        NoisePath { seed, dim, dt, base: ChaCha8Rng::seed_from_u64(seed), sqrt_dt: dt.sqrt() }
    }

    fn words_per_step(&self) -> u128 {
        (4 * self.dim.div_ceil(2)) as u128
    }

    /// Standard normals for `(step, agent)`, unscaled.
    pub fn normals(&self, step: u64, agent: u64, out: &mut [f64]) {
        let mut rng = self.base.clone();
        rng.set_stream(agent);
        rng.set_word_pos(step as u128 * self.words_per_step());
        let mut k = 0;
        while k < out.len() {
            let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
            out[k] = z0;
            if k + 1 < out.len() {
                out[k + 1] = z1;
            }
            k += 2;
        }
    }

    /// `ΔW` for `(step, agent)`, scaled by `√dt`.
    pub fn increment(&self, step: u64, agent: u64, out: &mut [f64]) {
        self.normals(step, agent, out);
        out.iter_mut().for_each(|z| *z *= self.sqrt_dt);
    }
}
