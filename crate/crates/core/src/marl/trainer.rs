use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::eval::LearnedPolicy;
use super::nets::{Dims, Team};
use super::replay::ReplayBuffer;
use super::rollout::{hindsight_augment, label_transitions, run_episode};
use super::update::{actor_update, critic_update, Batch};
use crate::config::{RunConfig, TrainMode};
use crate::error::{Error, Result};
use crate::scenario::{make_scenario, ScenarioId};
use crate::seeds::{self, ScenarioSeeds};

/// Summary of one training episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mode: TrainMode,
    pub scenario: ScenarioId,
    pub mean_agent_reward: f64,
    pub episode_crt: f64,
    pub noise_sigma: f64,
    /// Mean critic loss over this episode's updates, if any ran.
    pub critic_loss: Option<f64>,
}

pub struct Trainer {
    config: RunConfig,
    mode: TrainMode,
    scenarios: Vec<ScenarioId>,
    total_episodes: usize,
    team: Team,
    buffer: ReplayBuffer,
    scenario_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    batch_rng: ChaCha8Rng,
    episode: usize,
    next_scenario: ScenarioId,
}

impl Trainer {
    pub fn new(config: RunConfig, mode: TrainMode, scenarios: &[ScenarioId], total_episodes: usize) -> Result<Self> {
        config.validate()?;
        if scenarios.is_empty() {
            return Err(Error::config("training needs at least one scenario"));
        }
        if mode == TrainMode::MaddpgSingle && scenarios.len() != 1 {
            return Err(Error::config("maddpg_single trains on exactly one scenario"));
        }
        let seed = config.seeds.train;
        let dims = Dims::new(&config.env, mode);
        let team = Team::new(dims, config.train.hidden_units, config.train.lr, seed)?;
        let mut scenario_rng = seeds::rng(seed, seeds::stream::SCENARIO_SAMPLING);
        let next_scenario = pick(&mut scenario_rng, scenarios);
        Ok(Self {
            buffer: ReplayBuffer::new(config.train.buffer_capacity),
            noise_rng: seeds::rng(seed, seeds::stream::EXPLORATION),
            batch_rng: seeds::rng(seed, seeds::stream::MINIBATCH),
            scenarios: scenarios.to_vec(),
            config,
            mode,
            total_episodes,
            team,
            scenario_rng,
            episode: 0,
            next_scenario,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn mode(&self) -> TrainMode {
        self.mode
    }

    pub fn scenarios(&self) -> &[ScenarioId] {
        &self.scenarios
    }

    pub fn team(&self) -> &Team {
        &self.team
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn total_episodes(&self) -> usize {
        self.total_episodes
    }

    pub fn is_done(&self) -> bool {
        self.episode >= self.total_episodes
    }

    /// Base scenario seeds of this run's training episodes.
    pub fn train_seeds(&self) -> ScenarioSeeds {
        self.config.seeds.train_base()
    }

    /// Plays one exploration episode, stores its transitions and runs the
    /// gradient cycles.
    pub fn train_episode(&mut self) -> Result<EpisodeRecord> {
        let env = &self.config.env;
        let tc = &self.config.train;
        let g = self.next_scenario;
        let sigma = tc.noise_sigma(self.episode, self.total_episodes);
        let mut inst = make_scenario(g, ScenarioSeeds::for_episode(self.train_seeds(), self.episode as u64), env)?;
        let traj = {
            let mut policy = LearnedPolicy {
                team: &self.team,
                scenario: Some(g),
                sigma,
                rng: Some(&mut self.noise_rng),
            };
            run_episode(&mut inst, &mut policy, env, tc.episode_length)?
        };

        let k = if self.mode.samples_scenarios() {
            pick(&mut self.scenario_rng, &self.scenarios)
        } else {
            g
        };
        if self.mode.hindsight() {
            self.buffer.extend(hindsight_augment(&traj, g, k, env));
        } else {
            self.buffer.extend(label_transitions(&traj, g, env));
        }
        self.next_scenario = k;
        let mean_agent_reward = traj.mean_agent_reward(&env.reward_params(g));

        let critic_loss = self.optimize()?;
        let record = EpisodeRecord {
            episode: self.episode,
            mode: self.mode,
            scenario: g,
            mean_agent_reward,
            episode_crt: traj.crt,
            noise_sigma: sigma,
            critic_loss,
        };
        self.episode += 1;
        Ok(record)
    }

    /// Gradient cycles for one episode. Returns the mean critic loss, or
    /// `None` while the buffer holds fewer transitions than a minibatch.
    pub fn optimize(&mut self) -> Result<Option<f64>> {
        let tc = &self.config.train;
        if self.buffer.len() < tc.batch_size {
            return Ok(None);
        }
        let dims = self.team.dims;
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for _ in 0..tc.cycles_per_episode {
            for i in 0..dims.n_agents {
                let batch = Batch::sample(&self.buffer, &dims, tc.batch_size, &mut self.batch_rng)?;
                loss_sum += critic_update(&mut self.team, i, &batch, tc.gamma, tc.max_grad_norm)?;
                actor_update(&mut self.team, i, &batch, tc.action_bound_penalty, tc.max_grad_norm)?;
                count += 1;
            }
            self.team.soft_update(tc.polyak_decay)?;
        }
        Ok((count > 0).then(|| loss_sum / count as f64))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            &self.config,
            self.mode,
            &self.scenarios,
            self.total_episodes,
            self.episode,
            self.next_scenario,
            self.team.clone(),
            [
                self.scenario_rng.clone(),
                self.noise_rng.clone(),
                self.batch_rng.clone(),
            ],
        )
    }

    /// Resumes from a checkpoint. The replay buffer is not part of a
    /// checkpoint and starts empty.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config = ck.config()?;
        let mut t = Self::new(config, ck.mode, &ck.scenarios, ck.total_episodes)?;
        if ck.team.dims != t.team.dims {
            return Err(Error::Format("checkpoint: network shapes do not match its config".into()));
        }
        t.team = ck.team.clone();
        let [s, n, b] = ck.rngs.clone();
        t.scenario_rng = s;
        t.noise_rng = n;
        t.batch_rng = b;
        t.episode = ck.episode;
        t.next_scenario = ck.next_scenario;
        Ok(t)
    }
}

fn pick<R: Rng + ?Sized>(rng: &mut R, scenarios: &[ScenarioId]) -> ScenarioId {
    scenarios[rng.random_range(0..scenarios.len())]
}

/// Trains for the remaining episodes, calling `on_episode` after each.
pub fn train(
    trainer: &mut Trainer,
    mut on_episode: impl FnMut(&EpisodeRecord, &Trainer) -> Result<()>,
) -> Result<()> {
    while !trainer.is_done() {
        let rec = trainer.train_episode()?;
        on_episode(&rec, trainer)?;
    }
    Ok(())
}
