//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by
//! `(master seed, vehicle id, purpose)`; the ChaCha stream id carries an
//! extra index (e.g. the replanning iteration). Adding a vehicle or
//! reordering work therefore never perturbs another stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Wind = 1,
    Replan = 2,
    Fleet = 3,
}

pub fn stream(master: u64, uav: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&uav.to_le_bytes());
    key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Folds a seed and an index into a per-call seed, used where an API takes a
/// single `u64`.
pub fn derive_seed(master: u64, uav: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    stream(master, uav, purpose, index).next_u64()
}
