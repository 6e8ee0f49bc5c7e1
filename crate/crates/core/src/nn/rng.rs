//! Seed derivation for independent, reproducible random streams.
//!
//! Every randomized step in the pipeline owns a ChaCha RNG seeded through
//! [`derive_seed`], so results never depend on execution order or thread
//! count.

/// Named sub-streams of a run seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Instance = 3,
    Corruption = 4,
    Sentence = 5,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from a base seed, a stream tag and two
/// stream-specific indices (epoch/position, operation/probability, ...).
pub fn derive_seed(base: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut s = splitmix64(base ^ (stream as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    s = splitmix64(s ^ a.wrapping_mul(0xe703_7ed1_a0b4_28db));
    splitmix64(s ^ b.wrapping_mul(0x8ebc_6af0_9c88_c6e3))
}
