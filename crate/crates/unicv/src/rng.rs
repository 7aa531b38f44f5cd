//! Deterministic stream management for all simulation in this crate.
//!
//! Every random quantity derives from a single `u64` master seed. The seed is
//! expanded into a ChaCha8 key, and independent substreams are opened by
//! purpose (and, where needed, by work-item index) via the cipher's stream
//! counter. This gives two properties the test procedures rely on:
//!
//! * the bracket-quantile simulation and the critical-value simulation use
//!   independent randomness even though the caller supplies one seed;
//! * parallel replication loops can hand each work item its own stream, so
//!   results do not depend on scheduling or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag for a substream. Each tag owns a disjoint family of stream
/// ids, so draws for different purposes never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Draws of the limit statistic used for the uniform critical value.
    LimitDraws = 1,
    /// Draws of the max-abs Gaussian used for the confidence bracket.
    MaxAbsDraws = 2,
    /// Draws of the limit statistic used for the pointwise (naive) critical
    /// value when it has no closed form.
    NaiveDraws = 3,
    /// Synthetic data generation.
    DataGen = 4,
}

/// A family of reproducible random substreams expanded from one master seed.
#[derive(Debug, Clone)]
pub struct SeedStreams {
    key: [u8; 32],
    seed: u64,
}

impl SeedStreams {
    /// Expands `seed` into a full cipher key.
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        SeedStreams { key, seed }
    }

    /// The master seed this family was built from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Opens the substream `(domain, index)`. The index identifies a work
    /// item (replication, grid point); use 0 when the domain needs only one
    /// stream. Indices must stay below 2^56 so they cannot collide across
    /// domains.
    pub fn stream(&self, domain: StreamDomain, index: u64) -> ChaCha8Rng {
        assert!(index < (1u64 << 56), "stream index exceeds 2^56");
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((domain as u64) << 56) | index);
        rng
    }
}

/// Mixes a master seed with work-item coordinates into a fresh master seed
/// for a nested simulation (e.g. one Monte Carlo replication, which then
/// opens its own substreams). Plain XOR would correlate neighbouring items;
/// the SplitMix64 finalizer avalanches every bit instead.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut state = master;
    let s1 = splitmix64(&mut state);
    let mut mixed = s1 ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let s2 = splitmix64(&mut mixed);
    let mut out = s2 ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    splitmix64(&mut out)
}

/// SplitMix64 step: advances `state` and returns the next output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
