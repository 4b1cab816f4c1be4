//! Seeded, portable random number generation.
//!
//! All sampling in this crate runs on ChaCha8, a counter-based generator with
//! identical output on every platform. Evaluation replicas use the seed
//! `base + replica_index`; within a replica, episode `j` draws from stream `j`
//! of that seed. This makes every episode file reproducible byte-for-byte and
//! lets replicas (and episodes within a replica) be generated in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PortableRng = ChaCha8Rng;

/// Generator for stream 0 of `seed`.
pub fn seeded(seed: u64) -> PortableRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for an explicit `(seed, stream)` pair.
pub fn stream(seed: u64, stream: u64) -> PortableRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for replica `i` of an evaluation run.
pub fn replica_seed(base: u64, replica: usize) -> u64 {
    base.wrapping_add(replica as u64)
}
