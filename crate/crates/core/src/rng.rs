//! Seeded random streams.
//!
//! Every consumer of randomness derives its own generator from the run seed
//! plus a stream name and optional indices, so adding a new consumer never
//! perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derives a 64-bit stream key from a seed, a name and a list of indices.
pub fn stream_key(seed: u64, name: &str, indices: &[u64]) -> u64 {
    let mut key = splitmix64(seed ^ fnv1a(name.as_bytes()));
    for &i in indices {
        key = splitmix64(key ^ splitmix64(i));
    }
    key
}

/// Generator for the named stream.
pub fn stream(seed: u64, name: &str, indices: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(stream_key(seed, name, indices))
}
