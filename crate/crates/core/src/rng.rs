//! Counter-based seeding: every random draw is addressed by a key
//! (run seed, replication, lattice cell), never by generation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit key.
pub fn key(words: impl IntoIterator<Item = u64>) -> u64 {
    words.into_iter().fold(0x243F_6A88_85A3_08D3, |h, w| mix(h ^ mix(w)))
}

/// Seed of replication `rep` for a run seeded with `seed`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    key([seed, rep])
}

/// Generator for a lattice cell (or any other address) under a base seed.
/// Independent of box size and iteration order.
pub fn stream(seed: u64, address: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key(address.iter().copied()));
    rng
}
