//! Monte Carlo plumbing: estimates, reproducible per-worker random streams and
//! an order-preserving parallel runner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

/// Stream purposes. Two estimators with the same seed never share a stream.
pub mod purpose {
    pub const SPHERE: u64 = 1;
    pub const GRAPH: u64 = 2;
    pub const CERTIFY: u64 = 3;
    pub const CLIQUE: u64 = 4;
    pub const REGION: u64 = 5;
    pub const KAPPA: u64 = 6;
    pub const Q_RATIO: u64 = 7;
    pub const COEFFICIENT: u64 = 8;
    pub const PROJECTION: u64 = 9;
    pub const HATZ: u64 = 10;
    pub const PERFECT: u64 = 11;
    pub const SHIFTED_CAP: u64 = 12;
    pub const SEQUENCE: u64 = 13;
    pub const BOOTSTRAP: u64 = 14;
    pub const PAIR_REGION: u64 = 15;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, purpose, worker)`. The key depends on the
/// seed and purpose, the ChaCha stream id is the worker index.
pub fn substream(seed: u64, purpose: u64, worker: u64) -> Rng {
    let mut state = seed ^ purpose.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = Rng::from_seed(key);
    rng.set_stream(worker);
    rng
}

/// Splits `total` units into `workers` quotas; earlier workers take the remainder.
pub fn split_quota(total: u64, workers: usize) -> Vec<u64> {
    let w = workers.max(1) as u64;
    (0..w).map(|i| total / w + u64::from(i < total % w)).collect()
}

/// Runs `f(rng, worker, quota)` for every worker on its own substream and
/// returns the results in worker order, independent of thread scheduling.
pub fn run_workers<T, F>(seed: u64, purpose: u64, workers: usize, total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize, u64) -> T + Sync,
{
    let quotas = split_quota(total, workers);
    quotas
        .par_iter()
        .enumerate()
        .map(|(w, &q)| {
            let mut rng = substream(seed, purpose, w as u64);
            f(&mut rng, w, q)
        })
        .collect()
}

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub n: u64,
    mean: f64,
    m2: f64,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Tally) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

pub fn merge_all<'a>(tallies: impl IntoIterator<Item = &'a Tally>) -> Tally {
    let mut total = Tally::default();
    for t in tallies {
        total.merge(t);
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Proposals drawn, including rejected ones.
    pub n_samples: u64,
    /// Samples that entered the average.
    pub n_accepted: u64,
    pub seed: u64,
    pub workers: usize,
}

impl MCEstimate {
    pub fn from_tally(t: &Tally, n_samples: u64, seed: u64, workers: usize) -> Self {
        MCEstimate {
            value: t.mean(),
            std_error: t.std_error(),
            n_samples,
            n_accepted: t.n,
            seed,
            workers,
        }
    }

    /// Binomial proportion `hits / n`.
    pub fn proportion(hits: u64, n: u64, seed: u64, workers: usize) -> Self {
        let q = hits as f64 / n as f64;
        let var = if n > 1 {
            q * (1.0 - q) * n as f64 / (n - 1) as f64
        } else {
            0.0
        };
        MCEstimate {
            value: q,
            std_error: (var / n as f64).sqrt(),
            n_samples: n,
            n_accepted: n,
            seed,
            workers,
        }
    }

    /// Deterministic value reported through the same type.
    pub fn exact(value: f64, seed: u64, workers: usize) -> Self {
        MCEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            n_accepted: 0,
            seed,
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionComparison {
    pub estimate: MCEstimate,
    pub prediction: f64,
    pub prediction_source: String,
    pub z_score: f64,
}

impl PredictionComparison {
    pub fn new(estimate: MCEstimate, prediction: f64, source: impl Into<String>) -> Self {
        let diff = estimate.value - prediction;
        let z_score = if estimate.std_error > 0.0 {
            diff / estimate.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::MAX
        };
        PredictionComparison {
            estimate,
            prediction,
            prediction_source: source.into(),
            z_score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, purpose::CLIQUE, 0).random();
        let b: u64 = substream(7, purpose::CLIQUE, 0).random();
        let c: u64 = substream(7, purpose::CLIQUE, 1).random();
        let d: u64 = substream(7, purpose::KAPPA, 0).random();
        let e: u64 = substream(8, purpose::CLIQUE, 0).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }

    #[test]
    fn quotas_cover_total() {
        for (t, w) in [(10u64, 3usize), (0, 4), (7, 7), (5, 8)] {
            let q = split_quota(t, w);
            assert_eq!(q.len(), w);
            assert_eq!(q.iter().sum::<u64>(), t);
        }
    }

    #[test]
    fn tally_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.01).collect();
        let mut whole = Tally::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut parts = [Tally::default(); 3];
        for (i, &x) in xs.iter().enumerate() {
            parts[i % 3].push(x);
        }
        let merged = merge_all(&parts);
        assert_eq!(merged.n, whole.n);
        assert!((merged.mean() - whole.mean()).abs() < 1e-13);
        assert!((merged.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn runner_preserves_worker_order() {
        let out = run_workers(3, purpose::SPHERE, 5, 12, |rng, w, q| (w, q, rng.random::<u32>()));
        let again = run_workers(3, purpose::SPHERE, 5, 12, |rng, w, q| (w, q, rng.random::<u32>()));
        assert_eq!(out, again);
        assert_eq!(out.iter().map(|t| t.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }
}
