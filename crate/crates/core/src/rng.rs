//! Seeded random substreams.
//!
//! The generator is ChaCha8, which is counter based: the 256-bit key comes
//! from the scenario seed, the 64-bit stream id selects the agent and the
//! word position selects the step. Every `(seed, agent, step)` triple thus
//! owns a disjoint block of the keystream, so draws never depend on the
//! order in which agents are visited or on how work is split across
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per `(agent, step)` block: room for 32 `f64` draws.
const WORDS_PER_STEP: u128 = 64;

/// Stream id reserved for the moving-target random walk.
pub const TARGET_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    seed: u64,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator positioned at the start of the `(stream, step)` block.
    pub fn block(&self, stream: u64, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(step) * WORDS_PER_STEP);
        rng
    }

    /// `K` uniform draws in `[0, 1)` from the `(stream, step)` block.
    pub fn uniforms<const K: usize>(&self, stream: u64, step: u64) -> [f64; K] {
        debug_assert!(K as u128 * 2 <= WORDS_PER_STEP);
        let mut rng = self.block(stream, step);
        std::array::from_fn(|_| rng.random::<f64>())
    }
}
