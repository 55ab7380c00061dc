//! Seeded, platform-independent random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 substream derived from
//! the run seed: `seed_from_u64(seed)` followed by
//! `set_stream((tag << 32) | index)`. Adding a new consumer or recording
//! more output never shifts the draws seen by existing consumers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Mev = 1,
    Burn = 2,
    Epoch = 3,
    Perturbation = 4,
}

pub fn substream(seed: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 32) | (index & 0xffff_ffff));
    rng
}

/// Uniform draw on `[lo, hi]`; returns `lo` exactly when the range is empty.
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    lo + (hi - lo) * rng.gen::<f64>()
}
