use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{EnvConfig, TrainMode};
use crate::error::{Error, Result};
use crate::nn::{polyak_update, Adam, AdamConfig, Matrix, Mlp};
use crate::scenario::ScenarioId;

/// Network input and output widths for one team.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Width of the scenario one-hot fed to the networks; 0 when unconditioned.
    pub scenario_dim: usize,
}

impl Dims {
    pub fn new(env: &EnvConfig, mode: TrainMode) -> Self {
        Self {
            n_agents: env.scenario.n_bodyguards,
            obs_dim: env.obs_dim(),
            act_dim: env.action_dim(),
            scenario_dim: if mode.conditions_on_scenario() { ScenarioId::COUNT } else { 0 },
        }
    }

    pub fn conditioned(&self) -> bool {
        self.scenario_dim > 0
    }

    pub fn actor_in(&self) -> usize {
        self.obs_dim + self.scenario_dim
    }

    pub fn critic_in(&self) -> usize {
        self.n_agents * (self.obs_dim + self.act_dim) + self.scenario_dim
    }

    /// Column where agent `j`'s action starts in the critic input.
    pub fn action_col(&self, j: usize) -> usize {
        self.n_agents * self.obs_dim + j * self.act_dim
    }

    pub fn scenario_col(&self) -> usize {
        self.n_agents * (self.obs_dim + self.act_dim)
    }

    /// Actor input for one observation.
    pub fn actor_input(&self, obs: &[f64], g: Option<ScenarioId>) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::shape("observation width", self.obs_dim, obs.len()));
        }
        let mut x = Vec::with_capacity(self.actor_in());
        x.extend_from_slice(obs);
        if self.conditioned() {
            let g = g.ok_or_else(|| Error::config("scenario-conditioned networks need a scenario"))?;
            x.extend_from_slice(&g.one_hot());
        }
        Ok(x)
    }
}

/// Actor, critic, their targets and optimizers for one bodyguard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl AgentNets {
    pub fn new(dims: &Dims, hidden: usize, lr: f64, seed: u64) -> Result<Self> {
        let actor = Mlp::two_hidden(dims.actor_in(), hidden, dims.act_dim, seed.wrapping_mul(2), false)?;
        let critic = Mlp::two_hidden(dims.critic_in(), hidden, 1, seed.wrapping_mul(2).wrapping_add(1), true)?;
        Ok(Self {
            actor_opt: Adam::new(&actor, AdamConfig::with_lr(lr)),
            critic_opt: Adam::new(&critic, AdamConfig::with_lr(lr)),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }

    pub fn soft_update(&mut self, decay: f64) -> Result<()> {
        polyak_update(&mut self.target_actor, &self.actor, decay)?;
        polyak_update(&mut self.target_critic, &self.critic, decay)
    }
}

/// The bodyguard team.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Team {
    pub dims: Dims,
    pub agents: Vec<AgentNets>,
}

impl Team {
    pub fn new(dims: Dims, hidden: usize, lr: f64, seed: u64) -> Result<Self> {
        let agents = (0..dims.n_agents)
            .map(|i| AgentNets::new(&dims, hidden, lr, seed.wrapping_mul(64).wrapping_add(i as u64)))
            .collect::<Result<_>>()?;
        Ok(Self { dims, agents })
    }

    /// Raw (unclamped) actor outputs for every agent.
    pub fn act(&self, obs: &[Vec<f64>], g: Option<ScenarioId>) -> Result<Vec<Vec<f64>>> {
        if obs.len() != self.agents.len() {
            return Err(Error::shape("observation count", self.agents.len(), obs.len()));
        }
        self.agents
            .iter()
            .zip(obs)
            .map(|(a, o)| a.actor.forward_one(&self.dims.actor_input(o, g)?))
            .collect()
    }

    pub fn soft_update(&mut self, decay: f64) -> Result<()> {
        self.agents.iter_mut().try_for_each(|a| a.soft_update(decay))
    }

    /// Adds `scale * N(0, 1)` to every parameter of every network.
    pub fn jitter<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        for a in &mut self.agents {
            for net in [&mut a.actor, &mut a.critic, &mut a.target_actor, &mut a.target_critic] {
                for p in net.param_slices_mut() {
                    for v in p.iter_mut() {
                        *v += scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                    }
                }
            }
        }
    }
}

/// Clamps every action component (forces and utterance) to [-1, 1].
pub(crate) fn clamp_actions(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        *v = v.clamp(-1.0, 1.0);
    }
}
