//! Deterministic seed derivation.
//!
//! Every randomized stage of the pipeline draws its RNG seed through
//! [`derive_seed`], a pure function of the experiment seed plus a stream tag
//! and index. This makes results independent of execution order: parallel
//! and serial schedules see identical randomness.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` for the given `(stream, index)` pair.
///
/// The mixing is asymmetric in `stream` and `index`, so swapping them yields
/// an unrelated seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream)) ^ index)
}
