//! Point-mass particle world: VIP, bodyguards, bystanders and landmarks.
//!
//! Entity order inside a [`World`] is fixed: index 0 is the VIP, followed by
//! the bodyguards, then the bystanders, then the landmarks. Everything that
//! is not a landmark is "mobile" and receives exactly one force per step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntityKind {
    Vip,
    Bodyguard,
    Bystander,
    Landmark,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub pos: Vec2,
    pub vel: Vec2,
    pub radius: f64,
}

impl Entity {
    pub fn new(kind: EntityKind, pos: Vec2, radius: f64) -> Self {
        Self {
            kind,
            pos,
            vel: Vec2::ZERO,
            radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Seconds per step.
    pub dt: f64,
    /// Fraction of velocity lost per step, in [0, 1).
    pub damping: f64,
    pub max_speed: f64,
    /// Spring constant of the contact repulsion, force per unit overlap.
    pub contact_stiffness: f64,
    /// Mobile entities are confined to [-h, h]^2.
    pub arena_half_extent: f64,
    pub agent_radius: f64,
    pub landmark_radius: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            damping: 0.25,
            max_speed: 1.3,
            contact_stiffness: 50.0,
            arena_half_extent: 1.5,
            agent_radius: 0.05,
            landmark_radius: 0.08,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("physics.dt must be > 0"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::config("physics.damping must be in [0, 1)"));
        }
        if !(self.max_speed > 0.0) {
            return Err(Error::config("physics.max_speed must be > 0"));
        }
        if !(self.contact_stiffness >= 0.0) {
            return Err(Error::config("physics.contact_stiffness must be >= 0"));
        }
        if !(self.arena_half_extent > 0.0) {
            return Err(Error::config("physics.arena_half_extent must be > 0"));
        }
        if !(self.agent_radius > 0.0 && self.landmark_radius > 0.0) {
            return Err(Error::config("entity radii must be > 0"));
        }
        Ok(())
    }

    /// Force that holds a free body at constant velocity `v`.
    pub fn cruise_force(&self, v: Vec2) -> Vec2 {
        v * (self.damping / self.dt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    /// Number of nearest bystanders included in each observation.
    pub nearest_bystanders: usize,
    /// Dimension of the bodyguards' communication channel.
    pub comm_dim: usize,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self {
            nearest_bystanders: 5,
            comm_dim: 2,
        }
    }
}

impl ObservationSpec {
    pub fn obs_dim(&self, n_bodyguards: usize) -> usize {
        8 + 4 * self.nearest_bystanders + n_bodyguards.saturating_sub(1) * (4 + self.comm_dim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    entities: Vec<Entity>,
    n_bodyguards: usize,
    n_bystanders: usize,
    utterances: Vec<Vec<f64>>,
    comm_dim: usize,
    sim_time: u64,
}

impl World {
    pub fn new(
        vip: Entity,
        bodyguards: Vec<Entity>,
        bystanders: Vec<Entity>,
        landmarks: Vec<Entity>,
        comm_dim: usize,
    ) -> Result<Self> {
        let n_bodyguards = bodyguards.len();
        let n_bystanders = bystanders.len();
        let entities: Vec<Entity> = std::iter::once(vip)
            .chain(bodyguards)
            .chain(bystanders)
            .chain(landmarks)
            .collect();
        for e in &entities {
            if !(e.radius > 0.0) {
                return Err(Error::config("entity radius must be > 0"));
            }
            if !e.pos.is_finite() || !e.vel.is_finite() {
                return Err(Error::NonFinite("entity state"));
            }
        }
        Ok(Self {
            entities,
            n_bodyguards,
            n_bystanders,
            utterances: vec![vec![0.0; comm_dim]; n_bodyguards],
            comm_dim,
            sim_time: 0,
        })
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entities_mut(&mut self) -> &mut [Entity] {
        &mut self.entities
    }

    pub fn n_bodyguards(&self) -> usize {
        self.n_bodyguards
    }

    pub fn n_bystanders(&self) -> usize {
        self.n_bystanders
    }

    pub fn n_landmarks(&self) -> usize {
        self.entities.len() - self.n_mobile()
    }

    /// VIP, bodyguards and bystanders.
    pub fn n_mobile(&self) -> usize {
        1 + self.n_bodyguards + self.n_bystanders
    }

    pub fn comm_dim(&self) -> usize {
        self.comm_dim
    }

    pub fn sim_time(&self) -> u64 {
        self.sim_time
    }

    pub fn utterances(&self) -> &[Vec<f64>] {
        &self.utterances
    }

    pub fn vip(&self) -> &Entity {
        &self.entities[0]
    }

    pub fn bodyguard_index(&self, i: usize) -> usize {
        1 + i
    }

    pub fn bystander_index(&self, j: usize) -> usize {
        1 + self.n_bodyguards + j
    }

    pub fn landmark_index(&self, l: usize) -> usize {
        self.n_mobile() + l
    }

    pub fn bodyguard(&self, i: usize) -> &Entity {
        &self.entities[self.bodyguard_index(i)]
    }

    pub fn bystander(&self, j: usize) -> &Entity {
        &self.entities[self.bystander_index(j)]
    }

    pub fn landmark(&self, l: usize) -> &Entity {
        &self.entities[self.landmark_index(l)]
    }

    pub fn bodyguards(&self) -> &[Entity] {
        &self.entities[1..1 + self.n_bodyguards]
    }

    pub fn bystanders(&self) -> &[Entity] {
        &self.entities[1 + self.n_bodyguards..self.n_mobile()]
    }

    pub fn landmarks(&self) -> &[Entity] {
        &self.entities[self.n_mobile()..]
    }

    /// Bodyguard disks, the only occluders in the threat model.
    pub fn bodyguard_disks(&self) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        self.bodyguards().iter().map(|e| (e.pos, e.radius))
    }

    /// Adds the same offset to every position, landmarks included.
    pub fn translate(&mut self, offset: Vec2) {
        for e in &mut self.entities {
            e.pos += offset;
        }
    }
}

/// Advances the world by one step and returns the new state.
///
/// `forces` holds one force per mobile entity in entity order; `utterances`
/// holds one `comm_dim` vector per bodyguard and is stored verbatim.
pub fn step_world(
    world: &World,
    forces: &[Vec2],
    utterances: &[Vec<f64>],
    cfg: &PhysicsConfig,
) -> Result<World> {
    let mut next = world.clone();
    step_world_in_place(&mut next, forces, utterances, cfg)?;
    Ok(next)
}

pub fn step_world_in_place(
    world: &mut World,
    forces: &[Vec2],
    utterances: &[Vec<f64>],
    cfg: &PhysicsConfig,
) -> Result<()> {
    let n_mobile = world.n_mobile();
    if forces.len() != n_mobile {
        return Err(Error::shape("force count", n_mobile, forces.len()));
    }
    if utterances.len() != world.n_bodyguards {
        return Err(Error::shape("utterance count", world.n_bodyguards, utterances.len()));
    }
    for u in utterances {
        if u.len() != world.comm_dim {
            return Err(Error::shape("utterance dimension", world.comm_dim, u.len()));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("utterance"));
        }
    }
    for f in forces {
        if !f.is_finite() {
            return Err(Error::NonFinite("force"));
        }
        if f.x.abs() > 1.0 || f.y.abs() > 1.0 {
            return Err(Error::config(format!(
                "force components must lie in [-1, 1], got ({}, {})",
                f.x, f.y
            )));
        }
    }

    let mut total: Vec<Vec2> = forces.to_vec();
    for i in 0..n_mobile {
        for j in i + 1..n_mobile {
            let (a, b) = (&world.entities[i], &world.entities[j]);
            let delta = b.pos - a.pos;
            let dist = delta.norm();
            let penetration = a.radius + b.radius - dist;
            if penetration <= 0.0 {
                continue;
            }
            // Coincident centers push the higher index along +x.
            let dir = if dist > 0.0 {
                delta * (1.0 / dist)
            } else {
                Vec2::new(1.0, 0.0)
            };
            let push = dir * (cfg.contact_stiffness * penetration);
            total[i] -= push;
            total[j] += push;
        }
    }

    let h = cfg.arena_half_extent;
    for (e, f) in world.entities[..n_mobile].iter_mut().zip(&total) {
        let mut v = e.vel * (1.0 - cfg.damping) + *f * cfg.dt;
        let speed = v.norm();
        if speed > cfg.max_speed {
            v = v * (cfg.max_speed / speed);
        }
        let mut p = e.pos + v * cfg.dt;
        if p.x.abs() > h {
            p.x = p.x.clamp(-h, h);
            v.x = 0.0;
        }
        if p.y.abs() > h {
            p.y = p.y.clamp(-h, h);
            v.y = 0.0;
        }
        e.pos = p;
        e.vel = v;
    }

    world.utterances.clone_from_slice(utterances);
    world.sim_time += 1;
    Ok(())
}

/// Local observation of bodyguard `agent`.
///
/// Layout: own velocity, own position, VIP relative position and velocity,
/// relative position and velocity of the `m` nearest bystanders (ties by
/// index), relative position and velocity of every other bodyguard, then
/// every other bodyguard's last utterance.
pub fn observe(world: &World, agent: usize, spec: &ObservationSpec) -> Result<Vec<f64>> {
    let n = world.n_bodyguards;
    if agent >= n {
        return Err(Error::Index {
            what: "bodyguard",
            index: agent,
            len: n,
        });
    }
    if spec.nearest_bystanders == 0 || spec.nearest_bystanders > world.n_bystanders {
        return Err(Error::config(format!(
            "observation.nearest_bystanders must be in [1, {}]",
            world.n_bystanders
        )));
    }
    if spec.comm_dim != world.comm_dim {
        return Err(Error::shape("observation comm_dim", world.comm_dim, spec.comm_dim));
    }

    let me = world.bodyguard(agent);
    let mut out = Vec::with_capacity(spec.obs_dim(n));
    let push_rel = |out: &mut Vec<f64>, other: &Entity| {
        let dp = other.pos - me.pos;
        let dv = other.vel - me.vel;
        out.extend_from_slice(&[dp.x, dp.y, dv.x, dv.y]);
    };

    out.extend_from_slice(&[me.vel.x, me.vel.y, me.pos.x, me.pos.y]);
    push_rel(&mut out, world.vip());

    let mut order: Vec<(f64, usize)> = world
        .bystanders()
        .iter()
        .enumerate()
        .map(|(j, b)| (b.pos.distance(me.pos), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for &(_, j) in order.iter().take(spec.nearest_bystanders) {
        push_rel(&mut out, world.bystander(j));
    }

    for k in (0..n).filter(|&k| k != agent) {
        push_rel(&mut out, world.bodyguard(k));
    }
    for k in (0..n).filter(|&k| k != agent) {
        out.extend_from_slice(&world.utterances[k]);
    }
    debug_assert_eq!(out.len(), spec.obs_dim(n));
    Ok(out)
}
