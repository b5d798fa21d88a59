//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is derived with
//! SplitMix64 from a user seed and a list of 64-bit labels (draw number,
//! region code words, ...). Streams therefore depend only on what they are
//! used for, never on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Region, RegionKind};

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8 stream keyed by `seed` and `labels`.
pub fn stream(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &l in labels {
        state ^= l.wrapping_add(acc.rotate_left(17));
        acc = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Labels identifying a region: its kind, dimension and per-axis codes.
pub fn region_labels(region: &Region) -> Vec<u64> {
    let mut labels = Vec::with_capacity(region.dim() + 2);
    labels.push(match region.kind() {
        RegionKind::Continuous => 1,
        RegionKind::Discrete => 2,
    });
    labels.push(region.dim() as u64);
    for d in 0..region.dim() {
        labels.push(match region.kind() {
            RegionKind::Continuous => (1u64 << region.depth(d)) + region.index(d),
            RegionKind::Discrete => u64::from(region.state(d).unwrap_or(0)),
        });
    }
    labels
}
