use std::sync::Arc;

use super::replay::{JointTransition, StepData};
use crate::config::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scenario::{ScenarioId, ScenarioInstance};
use crate::threat::{reward_from_parts, survival_product, RewardParams};

/// Anything that can drive the bodyguards. Actions are `[fx, fy, utterance..]`
/// exactly as executed, every component in [-1, 1].
pub trait BodyguardController {
    fn reset(&mut self, _inst: &ScenarioInstance) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, inst: &ScenarioInstance, obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

/// One simulated step together with what is needed to score it under any
/// scenario's reward weights.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub next_obs: Vec<Vec<f64>>,
    /// Product of `1 - RT` over bystanders after the step.
    pub survival: f64,
    /// Bodyguard-to-VIP distances after the step.
    pub guard_dists: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub scenario: ScenarioId,
    pub steps: Vec<StepRecord>,
    pub crt: f64,
}

impl Trajectory {
    /// Per-agent undiscounted episode return.
    pub fn returns(&self, rp: &RewardParams) -> Vec<f64> {
        let n = self.steps.first().map_or(0, |s| s.guard_dists.len());
        let mut out = vec![0.0; n];
        for s in &self.steps {
            for (o, r) in out.iter_mut().zip(step_rewards(s, rp)) {
                *o += r;
            }
        }
        out
    }

    /// Episode return averaged over agents.
    pub fn mean_agent_reward(&self, rp: &RewardParams) -> f64 {
        let r = self.returns(rp);
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }
}

pub fn step_rewards(step: &StepRecord, rp: &RewardParams) -> Vec<f64> {
    step.guard_dists
        .iter()
        .map(|&d| reward_from_parts(step.survival, d, rp))
        .collect()
}

/// Plays `episode_length` steps of `inst` under `controller`.
pub fn run_episode(
    inst: &mut ScenarioInstance,
    controller: &mut dyn BodyguardController,
    env: &EnvConfig,
    episode_length: usize,
) -> Result<Trajectory> {
    let spec = &env.observation;
    let act_dim = env.action_dim();
    let n = inst.world.n_bodyguards();
    let dt = inst.physics().dt;
    controller.reset(inst)?;
    let mut obs = inst.observations(spec)?;
    let mut steps = Vec::with_capacity(episode_length);
    let mut crt = 0.0;
    for _ in 0..episode_length {
        let actions = controller.act(inst, &obs)?;
        if actions.len() != n {
            return Err(Error::shape("controller action count", n, actions.len()));
        }
        let mut forces = Vec::with_capacity(n);
        let mut utterances = Vec::with_capacity(n);
        for a in &actions {
            if a.len() != act_dim {
                return Err(Error::shape("controller action width", act_dim, a.len()));
            }
            forces.push(Vec2::new(a[0], a[1]));
            utterances.push(a[2..].to_vec());
        }
        inst.step(&forces, &utterances)?;
        let next_obs = inst.observations(spec)?;
        let world = &inst.world;
        let survival = survival_product(world, &env.threat);
        crt += (1.0 - survival) * dt;
        let vip = world.vip().pos;
        let guard_dists = world.bodyguards().iter().map(|g| g.pos.distance(vip)).collect();
        steps.push(StepRecord {
            obs: std::mem::replace(&mut obs, next_obs.clone()),
            actions,
            next_obs,
            survival,
            guard_dists,
        });
    }
    Ok(Trajectory {
        scenario: inst.id,
        steps,
        crt,
    })
}

fn step_data(s: &StepRecord) -> Arc<StepData> {
    Arc::new(StepData {
        obs: s.obs.concat(),
        actions: s.actions.concat(),
        next_obs: s.next_obs.concat(),
    })
}

/// Transitions labeled with scenario `g`'s rewards.
pub fn label_transitions(traj: &Trajectory, g: ScenarioId, env: &EnvConfig) -> Vec<JointTransition> {
    let rp = env.reward_params(g);
    traj.steps
        .iter()
        .map(|s| JointTransition {
            step: step_data(s),
            rewards: step_rewards(s, &rp),
            scenario: g,
        })
        .collect()
}

/// Hindsight relabeling: every step is stored twice, once under the
/// scenario `g` the team was told it was in and once under `k`. Both
/// copies share the same observations and actions.
pub fn hindsight_augment(traj: &Trajectory, g: ScenarioId, k: ScenarioId, env: &EnvConfig) -> Vec<JointTransition> {
    let (rg, rk) = (env.reward_params(g), env.reward_params(k));
    let mut out = Vec::with_capacity(2 * traj.steps.len());
    for s in &traj.steps {
        let data = step_data(s);
        out.push(JointTransition {
            step: Arc::clone(&data),
            rewards: step_rewards(s, &rg),
            scenario: g,
        });
        out.push(JointTransition {
            step: data,
            rewards: step_rewards(s, &rk),
            scenario: k,
        });
    }
    out
}
