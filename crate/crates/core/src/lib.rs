//! VIP protection as a cooperative multi-agent control problem.
//!
//! A team of bodyguards moves a disk-shaped formation around a walking VIP
//! and tries to keep bystanders out of line of sight. The crate contains the
//! particle simulator, the threat and reward model, four scripted crowd
//! scenarios, a hand-written quadrant load-balancing controller, a small MLP
//! toolkit with analytic gradients, and MADDPG-style trainers, including the
//! scenario-conditioned variant with hindsight scenario relabeling.

pub mod config;
pub mod error;
pub mod geometry;
pub mod marl;
pub mod nn;
pub mod qlb;
pub mod records;
pub mod scenario;
pub mod seeds;
pub mod sim;
pub mod threat;

pub use error::{Error, Result};
pub use geometry::Vec2;
pub use scenario::{ScenarioId, ScenarioInstance};
pub use sim::{EntityKind, PhysicsConfig, World};
