//! Deterministic per-trajectory random substreams.
//!
//! The master seed keys a ChaCha8 generator and the trajectory index picks
//! one of its 2⁶⁴ independent streams, so `(seed, index)` pairs never
//! collide and the increments a trajectory sees do not depend on which
//! worker runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::vec3::Vec3;

#[derive(Debug, Clone)]
pub struct Substream {
    master_seed: u64,
    index: u64,
    rng: ChaCha8Rng,
}

/// Position of a substream, sufficient to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstreamPosition {
    pub master_seed: u64,
    pub index: u64,
    /// ChaCha word position, stored as a decimal string in checkpoints.
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

pub fn derive_substream(master_seed: u64, trajectory_index: u64) -> Substream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory_index);
    Substream { master_seed, index: trajectory_index, rng }
}

impl Substream {
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Brownian increment `ΔW ~ N(0, dt I₃)`.
    #[inline]
    pub fn brownian_increment(&mut self, dt: f64) -> Vec3 {
        let s = dt.sqrt();
        let a: f64 = self.rng.sample(StandardNormal);
        let b: f64 = self.rng.sample(StandardNormal);
        let c: f64 = self.rng.sample(StandardNormal);
        [s * a, s * b, s * c]
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn position(&self) -> SubstreamPosition {
        SubstreamPosition { master_seed: self.master_seed, index: self.index, word_pos: self.rng.get_word_pos() }
    }

    pub fn from_position(pos: SubstreamPosition) -> Self {
        let mut s = derive_substream(pos.master_seed, pos.index);
        s.rng.set_word_pos(pos.word_pos);
        s
    }
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(seed: u64, index: u64, n: usize) -> Vec<Vec3> {
        let mut s = derive_substream(seed, index);
        (0..n).map(|_| s.brownian_increment(1.0)).collect()
    }

    #[test]
    fn same_pair_same_stream() {
        assert_eq!(draws(42, 7, 1000), draws(42, 7, 1000));
    }

    #[test]
    fn different_seeds_or_indices_differ() {
        assert_ne!(draws(42, 0, 10), draws(43, 0, 10));
        assert_ne!(draws(42, 0, 10), draws(42, 1, 10));
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let n = 20_000;
        let a: Vec<f64> = draws(9, 0, n).iter().map(|v| v[0]).collect();
        let b: Vec<f64> = draws(9, 1, n).iter().map(|v| v[0]).collect();
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // standard error of the sample correlation of independent N(0,1) is 1/√n
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn uniform_equidistribution() {
        // chi-square over 10 bins for both streams, 9 dof: P(χ² > 27.9) ≈ 0.001
        for index in [0, 1] {
            let mut s = derive_substream(5, index);
            let mut bins = [0usize; 10];
            let n = 50_000;
            for _ in 0..n {
                bins[(s.uniform() * 10.0) as usize] += 1;
            }
            let e = n as f64 / 10.0;
            let chi2: f64 = bins.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
            assert!(chi2 < 27.9, "chi2 {chi2}");
        }
    }

    #[test]
    fn increments_have_requested_variance() {
        let n = 40_000;
        let dt = 0.01;
        let d = {
            let mut s = derive_substream(1, 3);
            (0..n).map(|_| s.brownian_increment(dt)).collect::<Vec<_>>()
        };
        let var = d.iter().map(|v| v[1] * v[1]).sum::<f64>() / n as f64;
        // var of the sample variance: 2dt²/n
        assert!((var - dt).abs() < 5.0 * dt * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn position_resume_is_exact() {
        let mut s = derive_substream(11, 4);
        for _ in 0..37 {
            s.brownian_increment(0.1);
        }
        let pos = s.position();
        let json = serde_json::to_string(&pos).unwrap();
        let mut resumed = Substream::from_position(serde_json::from_str(&json).unwrap());
        for _ in 0..100 {
            assert_eq!(s.brownian_increment(0.1), resumed.brownian_increment(0.1));
        }
    }
}
