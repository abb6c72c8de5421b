use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::nets::{clamp_actions, Dims, Team};
use super::replay::{JointTransition, ReplayBuffer};
use crate::error::{Error, Result};
use crate::nn::{Gradients, Matrix, Mlp};
use crate::nn::gradcheck::relative_error;
use crate::scenario::ScenarioId;

/// A minibatch laid out as row-per-sample matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `S x (N * obs_dim)`, agents side by side.
    pub obs: Matrix,
    pub next_obs: Matrix,
    /// `S x (N * act_dim)`.
    pub actions: Matrix,
    /// `S x N`.
    pub rewards: Matrix,
    /// `S x 4` scenario one-hots.
    pub scenario: Matrix,
}

impl Batch {
    pub fn from_transitions(dims: &Dims, items: &[&JointTransition]) -> Result<Self> {
        let s = items.len();
        let n = dims.n_agents;
        let mut b = Batch {
            obs: Matrix::zeros(s, n * dims.obs_dim),
            next_obs: Matrix::zeros(s, n * dims.obs_dim),
            actions: Matrix::zeros(s, n * dims.act_dim),
            rewards: Matrix::zeros(s, n),
            scenario: Matrix::zeros(s, ScenarioId::COUNT),
        };
        for (r, t) in items.iter().enumerate() {
            let check = |what, want: usize, got: usize| {
                if want == got {
                    Ok(())
                } else {
                    Err(Error::shape(what, want, got))
                }
            };
            check("transition observation width", b.obs.cols(), t.step.obs.len())?;
            check("transition next observation width", b.next_obs.cols(), t.step.next_obs.len())?;
            check("transition action width", b.actions.cols(), t.step.actions.len())?;
            check("transition reward count", n, t.rewards.len())?;
            b.obs.row_mut(r).copy_from_slice(&t.step.obs);
            b.next_obs.row_mut(r).copy_from_slice(&t.step.next_obs);
            b.actions.row_mut(r).copy_from_slice(&t.step.actions);
            b.rewards.row_mut(r).copy_from_slice(&t.rewards);
            b.scenario.row_mut(r).copy_from_slice(&t.one_hot());
        }
        Ok(b)
    }

    pub fn sample<R: Rng + ?Sized>(buffer: &ReplayBuffer, dims: &Dims, size: usize, rng: &mut R) -> Result<Self> {
        let idx = buffer.sample_indices(rng, size)?;
        let items: Vec<&JointTransition> = idx.iter().map(|&i| buffer.get(i).expect("sampled index")).collect();
        Self::from_transitions(dims, &items)
    }

    /// Synthetic batch for gradient checks: normal observations and rewards,
    /// actions uniform in (-0.9, 0.9), random scenario one-hots.
    pub fn random<R: Rng + ?Sized>(dims: &Dims, size: usize, rng: &mut R) -> Self {
        let n = dims.n_agents;
        let mut normal = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(rng)).collect() };
        let obs = Matrix::from_vec(size, n * dims.obs_dim, normal(size * n * dims.obs_dim));
        let next_obs = Matrix::from_vec(size, n * dims.obs_dim, normal(size * n * dims.obs_dim));
        let rewards = Matrix::from_vec(size, n, normal(size * n));
        let actions = Matrix::from_vec(
            size,
            n * dims.act_dim,
            (0..size * n * dims.act_dim).map(|_| rng.random_range(-0.9..0.9)).collect(),
        );
        let mut scenario = Matrix::zeros(size, ScenarioId::COUNT);
        for r in 0..size {
            scenario.set(r, rng.random_range(0..ScenarioId::COUNT), 1.0);
        }
        Batch {
            obs,
            next_obs,
            actions,
            rewards,
            scenario,
        }
    }

    pub fn len(&self) -> usize {
        self.obs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Actor input rows `[o_j | g]` for agent `j`.
fn actor_inputs(dims: &Dims, obs: &Matrix, scenario: &Matrix, j: usize) -> Matrix {
    let mut x = Matrix::zeros(obs.rows(), dims.actor_in());
    x.write_block(0, &obs.block(j * dims.obs_dim, dims.obs_dim));
    if dims.conditioned() {
        x.write_block(dims.obs_dim, scenario);
    }
    x
}

/// Critic input rows `[o_1..o_N | a_1..a_N | g]`.
fn critic_inputs(dims: &Dims, obs: &Matrix, actions: &Matrix, scenario: &Matrix) -> Matrix {
    let mut x = Matrix::zeros(obs.rows(), dims.critic_in());
    x.write_block(0, obs);
    x.write_block(dims.action_col(0), actions);
    if dims.conditioned() {
        x.write_block(dims.scenario_col(), scenario);
    }
    x
}

fn check_agent(team: &Team, i: usize) -> Result<()> {
    if i >= team.agents.len() {
        return Err(Error::Index {
            what: "agent",
            index: i,
            len: team.agents.len(),
        });
    }
    Ok(())
}

/// TD targets `r_i + gamma * Q_i'(s', mu'(o'), g)` from the target networks.
fn td_targets(team: &Team, i: usize, batch: &Batch, gamma: f64) -> Result<Vec<f64>> {
    let dims = &team.dims;
    let mut next_actions = Matrix::zeros(batch.len(), dims.n_agents * dims.act_dim);
    for (j, a) in team.agents.iter().enumerate() {
        let mut mu = a.target_actor.predict(&actor_inputs(dims, &batch.next_obs, &batch.scenario, j))?;
        clamp_actions(&mut mu);
        next_actions.write_block(j * dims.act_dim, &mu);
    }
    let q_next = team.agents[i]
        .target_critic
        .predict(&critic_inputs(dims, &batch.next_obs, &next_actions, &batch.scenario))?;
    Ok((0..batch.len())
        .map(|r| batch.rewards.get(r, i) + gamma * q_next.get(r, 0))
        .collect())
}

/// Mean squared TD error of agent `i`'s critic and its parameter gradient.
pub fn critic_loss_and_grad(team: &Team, i: usize, batch: &Batch, gamma: f64) -> Result<(f64, Gradients)> {
    check_agent(team, i)?;
    let y = td_targets(team, i, batch, gamma)?;
    let critic = &team.agents[i].critic;
    let x = critic_inputs(&team.dims, &batch.obs, &batch.actions, &batch.scenario);
    let (q, cache) = critic.forward(&x)?;
    let s = batch.len() as f64;
    let mut grad = Matrix::zeros(batch.len(), 1);
    let mut loss = 0.0;
    for (r, &yr) in y.iter().enumerate() {
        let d = q.get(r, 0) - yr;
        loss += d * d;
        grad.set(r, 0, 2.0 * d / s);
    }
    Ok((loss / s, critic.param_gradients(&cache, &grad)?))
}

/// Gradient step on agent `i`'s critic. Returns the loss before the step.
pub fn critic_update(team: &mut Team, i: usize, batch: &Batch, gamma: f64, max_grad_norm: f64) -> Result<f64> {
    let (loss, mut g) = critic_loss_and_grad(team, i, batch, gamma)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss"));
    }
    g.clip_norm(max_grad_norm);
    let a = &mut team.agents[i];
    a.critic_opt.step(&mut a.critic, &g)?;
    Ok(loss)
}

/// Policy objective of agent `i` (to be minimized): minus the mean critic
/// value with agent `i`'s stored action replaced by its current policy
/// output, plus a quadratic penalty on outputs beyond [-1, 1].
pub fn actor_objective_and_grad(team: &Team, i: usize, batch: &Batch, penalty: f64) -> Result<(f64, Gradients)> {
    check_agent(team, i)?;
    let dims = &team.dims;
    let agent = &team.agents[i];
    let s = batch.len() as f64;
    let (raw, acache) = agent.actor.forward(&actor_inputs(dims, &batch.obs, &batch.scenario, i))?;
    let mut executed = raw.clone();
    clamp_actions(&mut executed);
    let mut actions = batch.actions.clone();
    actions.write_block(dims.action_col(i) - dims.action_col(0), &executed);
    let (q, ccache) = agent
        .critic
        .forward(&critic_inputs(dims, &batch.obs, &actions, &batch.scenario))?;
    let dq = Matrix::from_vec(batch.len(), 1, vec![-1.0 / s; batch.len()]);
    let cols = dims.action_col(i)..dims.action_col(i) + dims.act_dim;
    let mut da = agent.critic.input_gradient(&ccache, &dq, cols)?;

    let mut objective = -q.as_slice().iter().sum::<f64>() / s;
    for r in 0..batch.len() {
        for c in 0..dims.act_dim {
            let v = raw.get(r, c);
            let excess = v.abs() - 1.0;
            if excess > 0.0 {
                objective += penalty * excess * excess / s;
                da.set(r, c, 2.0 * penalty * excess * v.signum() / s);
            }
        }
    }
    Ok((objective, agent.actor.param_gradients(&acache, &da)?))
}

/// Gradient step on agent `i`'s actor. Returns the gradient norm before
/// clipping.
pub fn actor_update(team: &mut Team, i: usize, batch: &Batch, penalty: f64, max_grad_norm: f64) -> Result<f64> {
    let (obj, mut g) = actor_objective_and_grad(team, i, batch, penalty)?;
    if !obj.is_finite() {
        return Err(Error::NonFinite("actor objective"));
    }
    let norm = g.norm();
    g.clip_norm(max_grad_norm);
    let a = &mut team.agents[i];
    a.actor_opt.step(&mut a.actor, &g)?;
    Ok(norm)
}

/// Largest relative error between analytic and central-difference
/// gradients over `probes` randomly chosen parameters. Probes whose
/// one-sided differences disagree straddle a ReLU or clamp kink; they are
/// counted in `skipped` instead of compared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckResult {
    pub critic_max_rel_err: f64,
    pub actor_max_rel_err: f64,
    pub probes: usize,
    pub skipped: usize,
}

const KINK_TOLERANCE: f64 = 1e-3;

pub fn gradcheck<R: Rng + ?Sized>(
    team: &Team,
    i: usize,
    batch: &Batch,
    gamma: f64,
    penalty: f64,
    eps: f64,
    probes: usize,
    rng: &mut R,
) -> Result<GradcheckResult> {
    fn probe<R: Rng + ?Sized>(
        team: &Team,
        analytic: &Gradients,
        select: impl Fn(&mut Team) -> &mut Mlp,
        eval: impl Fn(&Team) -> Result<f64>,
        eps: f64,
        probes: usize,
        rng: &mut R,
    ) -> Result<(f64, usize)> {
        let groups = analytic.slices();
        let center = eval(team)?;
        let mut worst: f64 = 0.0;
        let mut skipped = 0;
        for _ in 0..probes {
            let gi = rng.random_range(0..groups.len());
            let pi = rng.random_range(0..groups[gi].len());
            let mut t = team.clone();
            let base = select(&mut t).param_slices()[gi][pi];
            select(&mut t).param_slices_mut()[gi][pi] = base + eps;
            let up = eval(&t)?;
            select(&mut t).param_slices_mut()[gi][pi] = base - eps;
            let down = eval(&t)?;
            if relative_error((up - center) / eps, (center - down) / eps) > KINK_TOLERANCE {
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(groups[gi][pi], numeric));
        }
        Ok((worst, skipped))
    }

    let (_, gc) = critic_loss_and_grad(team, i, batch, gamma)?;
    let (critic_err, critic_skipped) = probe(
        team,
        &gc,
        |t| &mut t.agents[i].critic,
        |t| critic_loss_and_grad(t, i, batch, gamma).map(|(l, _)| l),
        eps,
        probes,
        rng,
    )?;
    let (_, ga) = actor_objective_and_grad(team, i, batch, penalty)?;
    let (actor_err, actor_skipped) = probe(
        team,
        &ga,
        |t| &mut t.agents[i].actor,
        |t| actor_objective_and_grad(t, i, batch, penalty).map(|(l, _)| l),
        eps,
        probes,
        rng,
    )?;
    Ok(GradcheckResult {
        critic_max_rel_err: critic_err,
        actor_max_rel_err: actor_err,
        probes,
        skipped: critic_skipped + actor_skipped,
    })
}
