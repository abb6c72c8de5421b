use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nets::Team;
use super::rollout::{run_episode, BodyguardController};
use crate::config::{EnvConfig, QlbParams};
use crate::error::{Error, Result};
use crate::qlb::{qlb_actions, QlbState};
use crate::scenario::{make_scenario, ScenarioId, ScenarioInstance};
use crate::seeds::ScenarioSeeds;

pub const EVAL_REPORT_SCHEMA: u32 = 1;

/// Learned actors with optional Gaussian exploration noise on the force
/// components. Every action component is then clamped to [-1, 1].
pub struct LearnedPolicy<'a> {
    pub team: &'a Team,
    /// Scenario fed to conditioned networks; ignored otherwise.
    pub scenario: Option<ScenarioId>,
    pub sigma: f64,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a> LearnedPolicy<'a> {
    pub fn greedy(team: &'a Team, scenario: Option<ScenarioId>) -> Self {
        Self {
            team,
            scenario,
            sigma: 0.0,
            rng: None,
        }
    }
}

impl BodyguardController for LearnedPolicy<'_> {
    fn act(&mut self, _inst: &ScenarioInstance, obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut actions = self.team.act(obs, self.scenario)?;
        if self.sigma > 0.0 {
            let rng = self
                .rng
                .as_deref_mut()
                .ok_or_else(|| Error::config("exploration noise needs a random stream"))?;
            let normal = Normal::new(0.0, self.sigma).map_err(|e| Error::config(e.to_string()))?;
            for a in &mut actions {
                for v in a.iter_mut().take(2) {
                    *v += normal.sample(rng);
                }
            }
        }
        for a in &mut actions {
            for v in a.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
        Ok(actions)
    }
}

fn pad(forces: impl IntoIterator<Item = (f64, f64)>, comm_dim: usize) -> Vec<Vec<f64>> {
    forces
        .into_iter()
        .map(|(x, y)| {
            let mut a = vec![0.0; 2 + comm_dim];
            a[0] = x;
            a[1] = y;
            a
        })
        .collect()
}

/// Quadrant load balancing baseline.
#[derive(Clone, Debug, Default)]
pub struct QlbController {
    pub params: QlbParams,
    state: QlbState,
}

impl QlbController {
    pub fn new(params: QlbParams) -> Self {
        Self {
            params,
            state: QlbState::default(),
        }
    }
}

impl BodyguardController for QlbController {
    fn reset(&mut self, _inst: &ScenarioInstance) -> Result<()> {
        self.state = QlbState::default();
        Ok(())
    }

    fn act(&mut self, inst: &ScenarioInstance, _obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let f = qlb_actions(&inst.world, &mut self.state, &self.params, inst.physics())?;
        Ok(pad(f.into_iter().map(|v| (v.x, v.y)), inst.world.comm_dim()))
    }
}

/// Bodyguards that apply no force.
#[derive(Clone, Copy, Debug, Default)]
pub struct StationaryGuards;

impl BodyguardController for StationaryGuards {
    fn act(&mut self, inst: &ScenarioInstance, _obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = inst.world.n_bodyguards();
        Ok(pad(std::iter::repeat_n((0.0, 0.0), n), inst.world.comm_dim()))
    }
}

/// Uniform random forces in [-1, 1]^2.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    pub rng: ChaCha8Rng,
}

impl BodyguardController for RandomPolicy {
    fn act(&mut self, inst: &ScenarioInstance, _obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = inst.world.n_bodyguards();
        let f: Vec<(f64, f64)> = (0..n)
            .map(|_| (self.rng.random_range(-1.0..=1.0), self.rng.random_range(-1.0..=1.0)))
            .collect();
        Ok(pad(f, inst.world.comm_dim()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEval {
    pub episode: u64,
    pub crt: f64,
    pub mean_agent_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub controller: String,
    pub scenario: ScenarioId,
    pub episodes: usize,
    pub mean_crt: f64,
    pub std_crt: f64,
    pub mean_agent_reward: f64,
    pub per_episode: Vec<EpisodeEval>,
}

/// Runs `episodes` held-out episodes of `scenario` under `controller`.
/// Episode `e` uses the evaluation seeds derived from `base` and `e`, so
/// two controllers evaluated with the same `base` face identical crowds.
pub fn evaluate(
    env: &EnvConfig,
    controller: &mut dyn BodyguardController,
    label: &str,
    scenario: ScenarioId,
    episodes: usize,
    base: ScenarioSeeds,
    episode_length: usize,
) -> Result<EvalReport> {
    let rp = env.reward_params(scenario);
    let mut per_episode = Vec::with_capacity(episodes);
    for e in 0..episodes as u64 {
        let mut inst = make_scenario(scenario, ScenarioSeeds::for_eval_episode(base, e), env)?;
        let traj = run_episode(&mut inst, controller, env, episode_length)?;
        per_episode.push(EpisodeEval {
            episode: e,
            crt: traj.crt,
            mean_agent_reward: traj.mean_agent_reward(&rp),
        });
    }
    let n = per_episode.len().max(1) as f64;
    let mean_crt = per_episode.iter().map(|p| p.crt).sum::<f64>() / n;
    let var = if per_episode.len() > 1 {
        per_episode.iter().map(|p| (p.crt - mean_crt).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EvalReport {
        schema_version: EVAL_REPORT_SCHEMA,
        controller: label.to_string(),
        scenario,
        episodes,
        mean_crt,
        std_crt: var.sqrt(),
        mean_agent_reward: per_episode.iter().map(|p| p.mean_agent_reward).sum::<f64>() / n,
        per_episode,
    })
}
