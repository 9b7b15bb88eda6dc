//! Reproducible per-path random streams.
//!
//! Each path owns four ChaCha8 generators sharing one key derived from
//! `(base_seed, replicate)` and differing in the ChaCha stream id. The key is
//! `splitmix64(base_seed ^ splitmix64(replicate ^ 0x9E37_79B9_7F4A_7C15))`;
//! replicates are never seeded sequentially.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Substream {
    Wiener = 0,
    JumpTimes = 1,
    JumpMarks = 2,
    Init = 3,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for replicate `replicate` of an ensemble seeded with `base_seed`.
pub fn replicate_key(base_seed: u64, replicate: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(replicate ^ 0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone)]
pub struct RngStreams {
    base_seed: u64,
    replicate: u64,
    wiener: ChaCha8Rng,
    jump_times: ChaCha8Rng,
    jump_marks: ChaCha8Rng,
    init: ChaCha8Rng,
}

fn stream(key: u64, id: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(id as u64);
    rng
}

impl RngStreams {
    pub fn new(base_seed: u64, replicate: u64) -> Self {
        let key = replicate_key(base_seed, replicate);
        Self {
            base_seed,
            replicate,
            wiener: stream(key, Substream::Wiener),
            jump_times: stream(key, Substream::JumpTimes),
            jump_marks: stream(key, Substream::JumpMarks),
            init: stream(key, Substream::Init),
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn get(&mut self, id: Substream) -> &mut ChaCha8Rng {
        match id {
            Substream::Wiener => &mut self.wiener,
            Substream::JumpTimes => &mut self.jump_times,
            Substream::JumpMarks => &mut self.jump_marks,
            Substream::Init => &mut self.init,
        }
    }

    /// `rank` independent `N(0, dt)` increments.
    pub fn wiener_increments(&mut self, rank: usize, dt: f64) -> Vec<f64> {
        let sd = dt.sqrt();
        (0..rank)
            .map(|_| {
                let z: f64 = self.wiener.sample(StandardNormal);
                z * sd
            })
            .collect()
    }

    /// Exponential waiting time with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let u: f64 = self.jump_times.random();
        -(1.0 - u).ln() / rate
    }

    pub fn mark_uniform(&mut self) -> f64 {
        self.jump_marks.random()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path() {
        let mut a = RngStreams::new(42, 3);
        let mut b = RngStreams::new(42, 3);
        for _ in 0..10 {
            assert_eq!(a.wiener_increments(4, 0.01), b.wiener_increments(4, 0.01));
            assert_eq!(a.exponential(2.0).to_bits(), b.exponential(2.0).to_bits());
            assert_eq!(a.mark_uniform().to_bits(), b.mark_uniform().to_bits());
        }
    }

    #[test]
    fn replicates_and_streams_differ() {
        let mut a = RngStreams::new(42, 0);
        let mut b = RngStreams::new(42, 1);
        assert_ne!(a.wiener_increments(4, 1.0), b.wiener_increments(4, 1.0));
        let mut c = RngStreams::new(42, 0);
        let w: u64 = c.get(Substream::Wiener).random();
        let t: u64 = c.get(Substream::JumpTimes).random();
        let m: u64 = c.get(Substream::JumpMarks).random();
        let i: u64 = c.get(Substream::Init).random();
        let all = [w, t, m, i];
        for x in 0..4 {
            for y in x + 1..4 {
                assert_ne!(all[x], all[y]);
            }
        }
    }

    #[test]
    fn wiener_moments() {
        let mut s = RngStreams::new(7, 0);
        let n = 10_000;
        let dt = 0.01;
        let rank = 3;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| s.wiener_increments(rank, dt)).collect();
        for c in 0..rank {
            let mean = draws.iter().map(|d| d[c]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // SE of mean: sqrt(dt/n); SE of variance: dt*sqrt(2/(n-1))
            assert!(mean.abs() <= 3.0 * (dt / n as f64).sqrt());
            assert!((var - dt).abs() <= 3.0 * dt * (2.0 / (n - 1) as f64).sqrt());
        }
        for a in 0..rank {
            for b in a + 1..rank {
                let cov = draws.iter().map(|d| d[a] * d[b]).sum::<f64>() / n as f64;
                assert!(cov.abs() <= 3.0 * dt / (n as f64).sqrt());
            }
        }
    }
}
