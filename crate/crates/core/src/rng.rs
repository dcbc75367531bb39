//! Seed plumbing. One master seed fans out into independent sub-streams
//! (weight init, batch order, latent noise, splits, ...) so that changing
//! how one consumer draws does not perturb the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream tags. Each (master, stream) pair yields an independent RNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Batch,
    Noise,
    Split,
    Synth,
    Subsample,
    Augment,
    Eval,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Batch => 2,
            Stream::Noise => 3,
            Stream::Split => 4,
            Stream::Synth => 5,
            Stream::Subsample => 6,
            Stream::Augment => 7,
            Stream::Eval => 8,
        }
    }
}

/// SplitMix64 finalizer; decorrelates master^stream into a fresh seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: Stream) -> u64 {
    mix(master.wrapping_add(mix(stream.tag())))
}

/// Fold an arbitrary salt (repeat index, sub-task id, ...) into a master
/// seed, yielding a fresh decorrelated master. Structured differently from
/// [`derive_seed`] so folded masters never collide with stream seeds.
pub fn fold_seed(master: u64, salt: u64) -> u64 {
    mix(mix(master) ^ mix(salt))
}

/// Deterministic RNG for a (master seed, sub-stream) pair.
pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}

pub fn seed_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
