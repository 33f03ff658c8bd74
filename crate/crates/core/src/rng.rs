//! Seed derivation for emitters and the scheduler.
//!
//! Every run has a single master seed. Each emitter gets its own ChaCha
//! stream (stream id = emitter index) and the scheduler gets the last stream
//! id, so random streams never depend on thread scheduling or on how many
//! values another component has drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for the scheduler's own draws (elite selection on
/// restart).
pub const SCHEDULER_STREAM: u64 = u64::MAX;

fn expand_seed(master_seed: u64) -> [u8; 32] {
    // SplitMix64 expansion of the master seed into a 256-bit ChaCha key.
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    key
}

/// Independent stream `stream` derived from `master_seed`.
pub fn stream(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(expand_seed(master_seed));
    rng.set_stream(stream);
    rng
}

pub fn emitter_stream(master_seed: u64, emitter_index: usize) -> ChaCha8Rng {
    stream(master_seed, emitter_index as u64)
}

pub fn scheduler_stream(master_seed: u64) -> ChaCha8Rng {
    stream(master_seed, SCHEDULER_STREAM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8).map(|_| 0).scan(emitter_stream(7, 0), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..8).map(|_| 0).scan(emitter_stream(7, 0), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..8).map(|_| 0).scan(emitter_stream(7, 1), |r, _| Some(r.random())).collect();
        let d: Vec<u64> = (0..8).map(|_| 0).scan(emitter_stream(8, 0), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
