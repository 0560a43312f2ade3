//! Deterministic derivation of per-task seeds from one master seed.
//!
//! Every random consumer draws from its own sub-stream, identified by a
//! [`Stream`] tag and a task index. Results therefore do not depend on the
//! order in which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random sub-streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Network generation.
    Network,
    /// Parameter draws for sweeps.
    Params,
    /// Initial seed-host placement.
    Init,
    /// Gillespie sample paths.
    Gillespie,
    /// Network-source selection in sweeps.
    Source,
}

impl Stream {
    const fn tag(self) -> u64 {
        match self {
            Stream::Network => 0x6e65_7477_6f72_6b00,
            Stream::Params => 0x7061_7261_6d73_0000,
            Stream::Init => 0x696e_6974_0000_0000,
            Stream::Gillespie => 0x6769_6c6c_6573_7069,
            Stream::Source => 0x736f_7572_6365_0000,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for task `index` of `stream` under `master`.
pub fn derive(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.tag()).wrapping_add(splitmix64(index)))
}

/// RNG for task `index` of `stream` under `master`.
pub fn rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, index))
}

/// RNG seeded directly from a user-supplied seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
