use alloc::vec::Vec;

use rand::RngExt;

use crate::rng::Rng;

/// Inverted dropout mask: each entry is 0 with probability `p`, otherwise
/// `1 / (1 - p)`. Returns `None` when dropout is inactive.
pub(crate) fn mask(rng: Option<&mut Rng>, p: f64, len: usize) -> Option<Vec<f64>> {
    let rng = rng?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect(),
    )
}
