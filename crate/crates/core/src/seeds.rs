//! Seed derivation. Every random stream in a run is a ChaCha8 generator
//! keyed by a base seed plus a fixed stream id, so streams never alias.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Offset separating evaluation seeds from training seeds.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

pub mod stream {
    pub const LANDMARKS: u64 = 1;
    pub const BYSTANDERS: u64 = 2;
    pub const CONTROLLERS: u64 = 3;
    pub const SCENARIO_SAMPLING: u64 = 10;
    pub const EXPLORATION: u64 = 11;
    pub const MINIBATCH: u64 = 12;
    pub const NETWORK_INIT: u64 = 13;
    pub const RANDOM_POLICY: u64 = 14;
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeds for one scenario instance: landmark layout and crowd spawning are
/// drawn from independent seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioSeeds {
    pub landmark: u64,
    pub bystander: u64,
}

impl ScenarioSeeds {
    pub fn single(seed: u64) -> Self {
        Self {
            landmark: seed,
            bystander: seed,
        }
    }

    pub fn for_episode(base: Self, episode: u64) -> Self {
        Self {
            landmark: base.landmark.wrapping_add(episode),
            bystander: base.bystander.wrapping_add(episode),
        }
    }

    /// Moves the base seeds into the namespace of run seed `run`.
    pub fn for_run(base: Self, run: u64) -> Self {
        let shift = run << 32;
        Self {
            landmark: base.landmark.wrapping_add(shift),
            bystander: base.bystander.wrapping_add(shift),
        }
    }

    /// Same episode numbering, shifted into the evaluation namespace.
    pub fn for_eval_episode(base: Self, episode: u64) -> Self {
        Self::for_episode(
            Self {
                landmark: base.landmark.wrapping_add(EVAL_SEED_OFFSET),
                bystander: base.bystander.wrapping_add(EVAL_SEED_OFFSET),
            },
            episode,
        )
    }
}
