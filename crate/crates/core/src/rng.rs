//! Counter-based seed derivation.
//!
//! Every random quantity is drawn from a stream identified by the master
//! seed and a short tuple of tags (purpose, size index, batch index, …).
//! Streams are independent of how work is split across threads, so results
//! are identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout.
pub type Stream = ChaCha8Rng;

/// Tag for moment-estimation blocks.
pub const TAG_MOMENTS: u64 = 0x4d4f_4d45_4e54;
/// Tag for sampled joint models.
pub const TAG_MODEL: u64 = 0x4d4f_4445_4c;
/// Tag for draws of the standardised sum.
pub const TAG_SUM: u64 = 0x5355_4d;
/// Tag for tail-probability experiments.
pub const TAG_TAIL: u64 = 0x5441_494c;
/// Tag for randomised test batteries.
pub const TAG_BATTERY: u64 = 0x4241_5454;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed from a master seed and a tag path.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(master), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// The stream for `(master, tags)`.
pub fn stream(master: u64, tags: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive(master, tags))
}
