//! Counter-based sampling: every random draw is keyed by
//! `(seed, check name, sample index)`, so results do not depend on the
//! order in which samples are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Vec2;
use crate::torus::TorusPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleStream {
    key: [u8; 32],
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl SampleStream {
    pub fn new(seed: u64, check: &str) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a(check).to_le_bytes());
        key[16..24].copy_from_slice(&(check.len() as u64).to_le_bytes());
        Self { key }
    }

    /// Independent generator for one sample.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }

    /// A derived stream for a sub-task of the same check.
    pub fn child(&self, label: &str) -> Self {
        let mut key = self.key;
        let h = fnv1a(label).to_le_bytes();
        for (k, b) in key[24..].iter_mut().zip(h) {
            *k ^= b;
        }
        Self { key }
    }
}

pub fn uniform_point<R: Rng>(rng: &mut R) -> TorusPoint {
    TorusPoint::new(rng.random(), rng.random())
}

/// Uniform in the open disc of the given radius.
pub fn uniform_in_disc<R: Rng>(rng: &mut R, radius: f64) -> Vec2 {
    let rho = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Vec2::new(rho * theta.cos(), rho * theta.sin())
}

pub fn symmetric<R: Rng>(rng: &mut R, half_width: f64) -> f64 {
    half_width * (2.0 * rng.random::<f64>() - 1.0)
}
