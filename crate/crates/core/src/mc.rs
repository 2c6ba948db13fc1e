//! Deterministic parallel Monte Carlo aggregation.
//!
//! Work is split into chunks; chunk `r` runs single-threaded from the derived
//! seed `seed.child(r)` and returns running sums. Chunks execute on the rayon
//! pool but are collected in index order and reduced sequentially, so the
//! final numbers are independent of thread count and scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::Seed;

/// Normal-approximation mean estimate with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci_half: f64,
    pub samples: u64,
}

pub const Z95: f64 = 1.959963984540054;

/// Running sums for one chunk of i.i.d. scalar draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChunkSum {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: u64,
}

impl ChunkSum {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &ChunkSum) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
    }
}

pub fn aggregate(chunks: &[ChunkSum]) -> McEstimate {
    let mut total = ChunkSum::default();
    for c in chunks {
        total.merge(c);
    }
    let n = total.count.max(1) as f64;
    let mean = total.sum / n;
    let var = ((total.sum_sq / n) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    let std_err = (var / n).sqrt();
    McEstimate { mean, std_err, ci_half: Z95 * std_err, samples: total.count }
}

/// Run `chunks` independent chunks in parallel; `body(chunk_index, seed)`
/// must be a pure function of its arguments.
pub fn run_chunks<T, F>(seed: &Seed, chunks: usize, body: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Seed) -> T + Sync,
{
    (0..chunks)
        .into_par_iter()
        .map(|r| body(r, seed.child(r as u64)))
        .collect()
}

/// Number of leading chunks re-derived by report spot checks (~10%).
pub fn spot_chunks(chunks: usize) -> usize {
    chunks.div_ceil(10)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z2 / (4.0 * n)) / n).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunked_mean_is_deterministic_and_correct() {
        let seed = Seed::new(13);
        let body = |_r: usize, s: Seed| {
            let mut rng = s.rng();
            let mut c = ChunkSum::default();
            for _ in 0..10_000 {
                c.push(rng.gen::<f64>());
            }
            c
        };
        let a = aggregate(&run_chunks(&seed, 20, body));
        let b = aggregate(&run_chunks(&seed, 20, body));
        assert_eq!(a, b);
        assert!((a.mean - 0.5).abs() < 4.0 * a.std_err);
        assert_eq!(a.samples, 200_000);
    }

    #[test]
    fn spot_is_prefix_of_full() {
        let seed = Seed::new(99);
        let body = |r: usize, s: Seed| {
            let mut rng = s.rng();
            let mut c = ChunkSum::default();
            c.push(rng.gen::<f64>() + r as f64);
            c
        };
        let full = run_chunks(&seed, 25, body);
        let k = spot_chunks(25);
        let partial = run_chunks(&seed, k, body);
        assert_eq!(&full[..k], &partial[..]);
    }

    #[test]
    fn wilson_basic_properties() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.21);
        let (lo0, _) = wilson_interval(0, 100, Z95);
        assert!(lo0.abs() < 1e-12);
        let (_, hi1) = wilson_interval(100, 100, Z95);
        assert!(hi1 > 1.0 - 1e-12);
    }
}
