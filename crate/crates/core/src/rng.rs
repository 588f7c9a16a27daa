//! Counter-based random streams.
//!
//! Every draw in the crate comes from a ChaCha stream whose key is a pure
//! function of `(seed, domain, a, b)`. Nothing depends on the order in which
//! streams are created, so agents can be processed by any number of workers
//! and still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Keeping them distinct guarantees that, e.g., the
/// initialization stream of agent 3 never overlaps its PSO stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Init = 1,
    Coefficients = 2,
    Pso = 3,
    Topology = 4,
    Graph = 5,
    Analysis = 6,
}

/// Returns the stream keyed by `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
