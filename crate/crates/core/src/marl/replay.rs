use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::ScenarioId;

/// Observations and actions of one timestep for the whole team, stored
/// flat in agent order. Shared between the relabeled copies of a step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepData {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub next_obs: Vec<f64>,
}

/// One replay entry: a joint step plus per-agent rewards under scenario
/// `scenario`'s reward weights.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTransition {
    pub step: Arc<StepData>,
    pub rewards: Vec<f64>,
    pub scenario: ScenarioId,
}

impl JointTransition {
    pub fn n_agents(&self) -> usize {
        self.rewards.len()
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        let d = self.step.obs.len() / self.n_agents();
        &self.step.obs[i * d..(i + 1) * d]
    }

    pub fn next_obs(&self, i: usize) -> &[f64] {
        let d = self.step.next_obs.len() / self.n_agents();
        &self.step.next_obs[i * d..(i + 1) * d]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        let d = self.step.actions.len() / self.n_agents();
        &self.step.actions[i * d..(i + 1) * d]
    }

    pub fn one_hot(&self) -> [f64; ScenarioId::COUNT] {
        self.scenario.one_hot()
    }
}

/// FIFO ring of joint transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<JointTransition>,
    capacity: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::new(),
            capacity,
            pushed: 0,
        }
    }

    pub fn push(&mut self, t: JointTransition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.pushed += 1;
    }

    pub fn extend<I: IntoIterator<Item = JointTransition>>(&mut self, it: I) {
        for t in it {
            self.push(t);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Transitions ever pushed, including evicted ones.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn get(&self, i: usize) -> Option<&JointTransition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &JointTransition> {
        self.items.iter()
    }

    /// `n` distinct indices drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        if n > self.items.len() {
            return Err(Error::config(format!(
                "cannot sample {n} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), n).into_vec())
    }
}
