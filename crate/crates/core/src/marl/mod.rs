//! Centralized-critic actor-critic training for the bodyguard team.
//!
//! Each bodyguard owns a deterministic actor and a centralized critic that
//! sees every observation and action. In the scenario-conditioned modes both
//! networks also receive the scenario one-hot, so a single team of networks
//! covers all scenarios.

mod checkpoint;
mod eval;
mod nets;
mod replay;
mod rollout;
mod trainer;
mod update;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use eval::{evaluate, EVAL_REPORT_SCHEMA, EpisodeEval, EvalReport, LearnedPolicy, QlbController, RandomPolicy, StationaryGuards};
pub use nets::{AgentNets, Dims, Team};
pub use replay::{JointTransition, ReplayBuffer, StepData};
pub use rollout::{
    hindsight_augment, label_transitions, run_episode, step_rewards, BodyguardController, StepRecord, Trajectory,
};
pub use trainer::{train, EpisodeRecord, Trainer};
pub use update::{
    actor_objective_and_grad, actor_update, critic_loss_and_grad, critic_update, gradcheck, Batch, GradcheckResult,
};
