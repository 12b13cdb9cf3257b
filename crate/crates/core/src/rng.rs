//! Deterministic random streams.
//!
//! A generator is identified by `(seed, stream)`. Parallel work is split into
//! fixed chunks, each with its own stream, so results never depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub type McfRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64, stream: u64) -> McfRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point in the open unit simplex of dimension `d`.
pub fn uniform_simplex(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        if e.iter().all(|&v| v > 0.0) && s.is_finite() {
            return e.into_iter().map(|v| v / s).collect();
        }
    }
}

/// Positive vector with integer coordinates uniform in `1..=max` (exact in
/// every backend as long as `max < 2^24`).
pub fn positive_integer_vector<T: Scalar>(rng: &mut impl Rng, d: usize, max: i64) -> Vec<T> {
    (0..d)
        .map(|_| T::from_i64(rng.random_range(1..=max)))
        .collect()
}

/// Positive vector with coordinates uniform in `(0, 1)`.
pub fn positive_unit_vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| loop {
            let u = rng.random::<f64>();
            if u > 0.0 {
                break u;
            }
        })
        .collect()
}
