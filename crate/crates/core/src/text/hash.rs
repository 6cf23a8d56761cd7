//! Fixed non-semantic text encoder: FNV-1a over token ids, SplitMix64
//! stream seeded by the hash, Box-Muller Gaussians.
//!
//! Every step is specified down to the bit so the same vectors can be
//! produced in any language.

use crate::error::{Error, Result};

pub const FNV_OFFSET: u64 = 14695981039346656037;
pub const FNV_PRIME: u64 = 1099511628211;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// FNV-1a over each token id as four little-endian bytes.
pub fn hash_tokens(ids: &[u32]) -> u64 {
    ids.iter().fold(FNV_OFFSET, |h, id| {
        id.to_le_bytes()
            .iter()
            .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
    })
}

/// One SplitMix64 step: returns `(output, new_state)`.
pub fn splitmix64_next(state: u64) -> (u64, u64) {
    let state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    (z ^ (z >> 31), state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        let (v, s) = splitmix64_next(self.state);
        self.state = s;
        v
    }

    /// Uniform in `(0, 1]`: `((x >> 11) + 1) * 2^-53`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, 1)`: `(x >> 11) * 2^-53`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (n > 0) by multiply-shift.
    pub fn next_index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Box-Muller pair from two uniforms in `(0, 1]`.
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let radius = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (radius * theta.cos(), radius * theta.sin())
}

/// Deterministic Gaussian vector of dimension `d` (even) for a token
/// sequence. Never trainable.
pub fn hash_encode(ids: &[u32], d: usize) -> Result<Vec<f64>> {
    if d == 0 || !d.is_multiple_of(2) {
        return Err(Error::Config(format!("hash dimension must be even and positive, got {d}")));
    }
    let mut rng = SplitMix64::new(hash_tokens(ids));
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let u1 = rng.next_open01();
        let u2 = rng.next_open01();
        let (z1, z2) = box_muller(u1, u2);
        out.push(z1);
        out.push(z2);
    }
    Ok(out)
}
