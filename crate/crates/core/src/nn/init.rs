use alloc::vec::Vec;

use rand::RngExt;

use crate::rng::Rng;

/// Glorot-uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
pub(crate) fn glorot(rng: &mut Rng, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
    let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    (0..count).map(|_| rng.random_range(-a..a)).collect()
}
