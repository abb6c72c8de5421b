//! Threat level, residual threat under bodyguard occlusion, cumulative
//! residual threat (CRT) and the bodyguard reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{line_of_sight, Vec2};
use crate::sim::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreatParams {
    pub a: f64,
    pub b: f64,
    /// Bystanders at or beyond this distance pose no threat.
    pub safe_dist: f64,
}

impl Default for ThreatParams {
    fn default() -> Self {
        Self {
            a: 3.0,
            b: 1.0,
            safe_dist: 0.6,
        }
    }
}

impl ThreatParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.safe_dist > 0.0) {
            return Err(Error::config("threat.a, threat.b and threat.safe_dist must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub alpha: f64,
    pub beta: f64,
    /// Inner radius of the band a bodyguard should keep around the VIP.
    pub min_dist: f64,
    /// Outer radius of the band; shared with [`ThreatParams::safe_dist`].
    pub safe_dist: f64,
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta >= 0.0) {
            return Err(Error::config("reward alpha must be > 0 and beta >= 0"));
        }
        if !(0.0 < self.min_dist && self.min_dist < self.safe_dist) {
            return Err(Error::config("reward band needs 0 < min_dist < safe_dist"));
        }
        Ok(())
    }

    /// Lowest possible per-step reward, `-(alpha + beta)`.
    pub fn floor(&self) -> f64 {
        -(self.alpha + self.beta)
    }
}

/// Threat posed by a bystander at distance `dist` from the VIP.
pub fn threat_level(dist: f64, los: bool, p: &ThreatParams) -> f64 {
    if los && dist < p.safe_dist {
        (-p.a * dist / p.b).exp()
    } else {
        0.0
    }
}

/// Threat from bystander `j` after bodyguard occlusion.
pub fn residual_threat(world: &World, j: usize, p: &ThreatParams) -> f64 {
    let vip = world.vip().pos;
    let b = world.bystander(j).pos;
    let dist = vip.distance(b);
    if dist >= p.safe_dist {
        return 0.0;
    }
    threat_level(dist, line_of_sight(vip, b, world.bodyguard_disks()), p)
}

/// Threat from bystander `j` ignoring bodyguards.
pub fn raw_threat(world: &World, j: usize, p: &ThreatParams) -> f64 {
    threat_level(world.vip().pos.distance(world.bystander(j).pos), true, p)
}

/// Product over bystanders of `1 - RT`, the probability that no assault
/// succeeds during this instant.
pub fn survival_product(world: &World, p: &ThreatParams) -> f64 {
    (0..world.n_bystanders()).fold(1.0, |acc, j| acc * (1.0 - residual_threat(world, j, p)))
}

/// Instantaneous combined residual threat; integrate over time for CRT.
pub fn crt_step(world: &World, p: &ThreatParams) -> f64 {
    1.0 - survival_product(world, p)
}

/// `0` inside the band `[min_dist, safe_dist]` around the VIP, `-1` outside.
pub fn distance_regularizer(bodyguard: Vec2, vip: Vec2, p: &RewardParams) -> f64 {
    band_penalty(bodyguard.distance(vip), p)
}

pub fn band_penalty(dist: f64, p: &RewardParams) -> f64 {
    if p.min_dist <= dist && dist <= p.safe_dist {
        0.0
    } else {
        -1.0
    }
}

/// Composite reward from a precomputed survival product and the
/// bodyguard-to-VIP distance.
pub fn reward_from_parts(survival: f64, bodyguard_dist: f64, p: &RewardParams) -> f64 {
    p.alpha * (-1.0 + survival) + p.beta * band_penalty(bodyguard_dist, p)
}

pub fn bodyguard_reward(world: &World, i: usize, tp: &ThreatParams, rp: &RewardParams) -> f64 {
    let dist = world.bodyguard(i).pos.distance(world.vip().pos);
    reward_from_parts(survival_product(world, tp), dist, rp)
}

/// Rectangle-rule accumulator for the cumulative residual threat.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CrtAccumulator {
    total: f64,
}

impl CrtAccumulator {
    pub fn add(&mut self, step_value: f64, dt: f64) {
        self.total += step_value * dt;
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}
