//! Seeded random streams.
//!
//! Every consumer gets its own stream derived from `(seed, index, purpose)`
//! through SplitMix64 mixing, so folds and bugs can be processed in any
//! order (or concurrently) without changing results.

use rand::{Rng as _, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

pub type Rng = Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Folds = 1,
    Init = 2,
    Shuffle = 3,
    Dropout = 4,
    Synth = 5,
    GradCheck = 6,
}

pub fn derive_seed(seed: u64, index: u64, purpose: Purpose) -> u64 {
    let mut mix = SplitMix64::seed_from_u64(seed);
    let a = mix.next_u64();
    let mut mix = SplitMix64::seed_from_u64(a ^ index);
    let b = mix.next_u64();
    let mut mix = SplitMix64::seed_from_u64(b ^ purpose as u64);
    mix.next_u64()
}

pub fn stream(seed: u64, index: u64, purpose: Purpose) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, index, purpose))
}
