//! Deterministic random streams.
//!
//! Every randomized routine takes a 64-bit seed. Work that is split into shards
//! draws shard `s` from ChaCha stream `s` of that seed, so results depend only on
//! `(seed, shard count)` and not on how shards are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Independent stream `stream` of generator `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for a named sub-task (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sizes of `shards` near-equal parts of `total`, larger parts first.
pub fn shard_sizes(total: usize, shards: usize) -> impl Iterator<Item = usize> {
    let base = total / shards;
    let extra = total % shards;
    (0..shards).map(move |s| base + usize::from(s < extra))
}
