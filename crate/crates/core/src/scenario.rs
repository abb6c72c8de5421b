//! The four crowd scenarios and the scripted VIP and bystander behaviors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::error::{Error, Result};
use crate::geometry::{circular_mean, Vec2};
use crate::seeds::{self, ScenarioSeeds};
use crate::sim::{self, Entity, EntityKind, ObservationSpec, PhysicsConfig, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    RandomLandmark,
    ShoppingMall,
    Street,
    PieInTheFace,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::RandomLandmark,
        ScenarioId::ShoppingMall,
        ScenarioId::Street,
        ScenarioId::PieInTheFace,
    ];
    pub const COUNT: usize = 4;

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; Self::COUNT] {
        let mut g = [0.0; Self::COUNT];
        g[self.ordinal()] = 1.0;
        g
    }

    /// Inverse of [`ScenarioId::one_hot`]; rejects anything not exactly one-hot.
    pub fn from_one_hot(g: &[f64]) -> Option<Self> {
        if g.len() != Self::COUNT || g.iter().any(|&v| v != 0.0 && v != 1.0) {
            return None;
        }
        let mut hot = g.iter().enumerate().filter(|(_, &v)| v == 1.0);
        match (hot.next(), hot.next()) {
            (Some((i, _)), None) => Self::from_ordinal(i),
            _ => None,
        }
    }

    /// Canonical name used in config keys, CSV files and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            ScenarioId::RandomLandmark => "random_landmark",
            ScenarioId::ShoppingMall => "shopping_mall",
            ScenarioId::Street => "street",
            ScenarioId::PieInTheFace => "pie_in_the_face",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "random_landmark" | "random_landmarks" | "rl" => ScenarioId::RandomLandmark,
            "shopping_mall" | "mall" | "sm" => ScenarioId::ShoppingMall,
            "street" => ScenarioId::Street,
            "pie_in_the_face" | "pie" | "red_carpet" => ScenarioId::PieInTheFace,
            _ => return Err(Error::config(format!("unknown scenario `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_bodyguards: usize,
    pub n_bystanders: usize,
    /// The VIP slows down when a bystander is closer than this and halts at
    /// this distance.
    pub personal_space: f64,
    /// Bodyguards spawn within this distance of the VIP.
    pub bodyguard_spawn_radius: f64,
    /// Minimum spawn distance between a bystander and the VIP.
    pub bystander_clearance: f64,
    pub vicsek_radius: f64,
    /// Half-width of the uniform heading noise, radians.
    pub vicsek_noise: f64,
    /// Street bystander force magnitude as a fraction of `max_speed`.
    pub bystander_speed_frac: f64,
    /// Magnitude of the VIP's walking force; 1 matches the bodyguards' top speed.
    pub vip_force: f64,
    /// Lateral offset of the crowd barrier from the carpet.
    pub pie_line_offset: f64,
    /// Lateral range of rule-abiding crowd anchors behind the barrier.
    pub pie_crowd_near: f64,
    pub pie_crowd_far: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_bodyguards: 4,
            n_bystanders: 10,
            personal_space: 0.15,
            bodyguard_spawn_radius: 0.3,
            bystander_clearance: 0.3,
            vicsek_radius: 0.3,
            vicsek_noise: 0.2,
            bystander_speed_frac: 0.6,
            vip_force: 0.7,
            pie_line_offset: 0.25,
            pie_crowd_near: 1.0,
            pie_crowd_far: 1.4,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bodyguards == 0 || self.n_bystanders == 0 {
            return Err(Error::config("scenario needs at least one bodyguard and one bystander"));
        }
        if !(self.personal_space > 0.0) {
            return Err(Error::config("scenario.personal_space must be > 0"));
        }
        if !(self.bodyguard_spawn_radius > 0.0 && self.vicsek_radius > 0.0) {
            return Err(Error::config("scenario radii must be > 0"));
        }
        if !(self.vicsek_noise >= 0.0) {
            return Err(Error::config("scenario.vicsek_noise must be >= 0"));
        }
        if !(self.bystander_speed_frac > 0.0) {
            return Err(Error::config("scenario.bystander_speed_frac must be > 0"));
        }
        if !(self.vip_force > 0.0 && self.vip_force <= 1.0) {
            return Err(Error::config("scenario.vip_force must be in (0, 1]"));
        }
        if !(self.pie_line_offset < self.pie_crowd_near && self.pie_crowd_near <= self.pie_crowd_far) {
            return Err(Error::config(
                "pie crowd must stand behind the line: line_offset < crowd_near <= crowd_far",
            ));
        }
        Ok(())
    }
}

/// Per-bystander behavior state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BystanderController {
    /// Walks to a landmark, then picks a different one.
    Waypoint { target: usize },
    /// Vicsek-aligned street walker heading for a point outside the arena.
    Vicsek { heading: f64, waypoint: Vec2 },
    /// Holds its spot behind the barrier.
    RuleAbiding { anchor: Vec2 },
    /// Ignores the barrier and goes for the VIP.
    Unruly,
}

#[derive(Clone, Debug)]
pub struct ScenarioInstance {
    pub id: ScenarioId,
    pub world: World,
    /// Landmark number (not entity index) the VIP walks to.
    pub vip_destination: usize,
    pub controllers: Vec<BystanderController>,
    /// Crowd barrier in the pie-in-the-face scenario.
    pub boundary_line: Option<(Vec2, Vec2)>,
    cfg: ScenarioConfig,
    physics: PhysicsConfig,
    rng: ChaCha8Rng,
}

fn uniform_point(rng: &mut ChaCha8Rng, half: f64) -> Vec2 {
    Vec2::new(rng.random_range(-half..half), rng.random_range(-half..half))
}

fn shop_positions(h: f64) -> Vec<Vec2> {
    let edge = h - 0.2;
    let offsets = [-0.8, 0.0, 0.8];
    let mut out = Vec::with_capacity(12);
    for &o in &offsets {
        out.push(Vec2::new(o, edge));
    }
    for &o in &offsets {
        out.push(Vec2::new(edge, o));
    }
    for &o in &offsets {
        out.push(Vec2::new(o, -edge));
    }
    for &o in &offsets {
        out.push(Vec2::new(-edge, o));
    }
    out
}

fn pick_distinct(rng: &mut ChaCha8Rng, n: usize, not: usize) -> usize {
    let k = rng.random_range(0..n - 1);
    if k >= not {
        k + 1
    } else {
        k
    }
}

/// Builds a fresh, seeded instance of scenario `id`.
pub fn make_scenario(id: ScenarioId, seeds: ScenarioSeeds, env: &EnvConfig) -> Result<ScenarioInstance> {
    let cfg = &env.scenario;
    let phys = &env.physics;
    cfg.validate()?;
    phys.validate()?;

    let mut lm_rng = seeds::rng(seeds.landmark, seeds::stream::LANDMARKS);
    let mut by_rng = seeds::rng(seeds.bystander, seeds::stream::BYSTANDERS);
    let ctl_rng = seeds::rng(seeds.bystander, seeds::stream::CONTROLLERS);

    let h = phys.arena_half_extent;
    let inner = h - 0.1;
    let r = phys.agent_radius;
    let m = cfg.n_bystanders;

    let landmark = |p: Vec2| Entity::new(EntityKind::Landmark, p, phys.landmark_radius);

    let (landmark_pos, vip_start, vip_destination, boundary_line): (Vec<Vec2>, Vec2, usize, _) = match id {
        ScenarioId::RandomLandmark => {
            let pts: Vec<Vec2> = (0..12).map(|_| uniform_point(&mut lm_rng, h - 0.2)).collect();
            let start = lm_rng.random_range(0..12);
            let dest = pick_distinct(&mut lm_rng, 12, start);
            (pts.clone(), pts[start], dest, None)
        }
        ScenarioId::ShoppingMall => {
            let pts = shop_positions(h);
            let start = by_rng.random_range(0..12);
            let dest = pick_distinct(&mut by_rng, 12, start);
            (pts.clone(), pts[start], dest, None)
        }
        ScenarioId::Street => {
            let y = lm_rng.random_range(-0.4..0.4);
            let start = Vec2::new(-h + 0.2, y);
            (vec![start, Vec2::new(h + 0.5, y)], start, 1, None)
        }
        ScenarioId::PieInTheFace => {
            let xs = [-1.2, -0.72, -0.24, 0.24, 0.72, 1.2];
            let pts: Vec<Vec2> = xs.iter().map(|&x| Vec2::new(x * h / 1.5, 0.0)).collect();
            let line_y = cfg.pie_line_offset;
            let line = (Vec2::new(-h, line_y), Vec2::new(h, line_y));
            (pts.clone(), pts[0], pts.len() - 1, Some(line))
        }
    };

    let vip = Entity::new(EntityKind::Vip, vip_start, r);

    let bodyguards: Vec<Entity> = (0..cfg.n_bodyguards)
        .map(|_| {
            let rho = by_rng.random_range(2.0 * r..=cfg.bodyguard_spawn_radius.max(2.0 * r));
            let theta = by_rng.random_range(0.0..std::f64::consts::TAU);
            let p = (vip_start + Vec2::from_angle(theta) * rho).clamp_components(-h, h);
            Entity::new(EntityKind::Bodyguard, p, r)
        })
        .collect();

    let spawn_clear = |rng: &mut ChaCha8Rng| loop {
        let p = uniform_point(rng, inner);
        if p.distance(vip_start) >= cfg.bystander_clearance {
            break p;
        }
    };

    let mut bystander_pos = Vec::with_capacity(m);
    let mut controllers = Vec::with_capacity(m);
    match id {
        ScenarioId::RandomLandmark | ScenarioId::ShoppingMall => {
            for _ in 0..m {
                bystander_pos.push(spawn_clear(&mut by_rng));
                controllers.push(BystanderController::Waypoint {
                    target: by_rng.random_range(0..landmark_pos.len()),
                });
            }
        }
        ScenarioId::Street => {
            for k in 0..m {
                let p = spawn_clear(&mut by_rng);
                let side = if k % 2 == 0 { 1.0 } else { -1.0 };
                let waypoint = Vec2::new(side * (h + 1.0), by_rng.random_range(-(h - 0.3)..(h - 0.3)));
                let heading = (waypoint - p).angle() + by_rng.random_range(-0.5..0.5);
                bystander_pos.push(p);
                controllers.push(BystanderController::Vicsek { heading, waypoint });
            }
        }
        ScenarioId::PieInTheFace => {
            let unruly = by_rng.random_range(0..m);
            for k in 0..m {
                if k == unruly {
                    let x = (vip_start.x + by_rng.random_range(-0.2..1.0)).clamp(-inner, inner);
                    let y = by_rng.random_range(cfg.pie_crowd_near..(cfg.pie_crowd_near + 0.3));
                    bystander_pos.push(Vec2::new(x, y.min(inner)));
                    controllers.push(BystanderController::Unruly);
                } else {
                    let anchor = Vec2::new(
                        by_rng.random_range(-inner..inner),
                        by_rng.random_range(cfg.pie_crowd_near..=cfg.pie_crowd_far).min(inner),
                    );
                    bystander_pos.push(anchor);
                    controllers.push(BystanderController::RuleAbiding { anchor });
                }
            }
        }
    }

    let bystanders = bystander_pos
        .into_iter()
        .map(|p| Entity::new(EntityKind::Bystander, p, r))
        .collect();
    let landmarks = landmark_pos.into_iter().map(landmark).collect();
    let world = World::new(vip, bodyguards, bystanders, landmarks, env.observation.comm_dim)?;

    Ok(ScenarioInstance {
        id,
        world,
        vip_destination,
        controllers,
        boundary_line,
        cfg: cfg.clone(),
        physics: phys.clone(),
        rng: ctl_rng,
    })
}

/// Vicsek alignment: circular mean of the neighborhood headings plus noise.
pub fn vicsek_heading<I: IntoIterator<Item = f64>>(neighbor_headings: I, noise: f64) -> f64 {
    circular_mean(neighbor_headings).unwrap_or(0.0) + noise
}

impl ScenarioInstance {
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn physics(&self) -> &PhysicsConfig {
        &self.physics
    }

    pub fn destination(&self) -> &Entity {
        self.world.landmark(self.vip_destination)
    }

    pub fn unruly_count(&self) -> usize {
        self.controllers
            .iter()
            .filter(|c| matches!(c, BystanderController::Unruly))
            .count()
    }

    /// Force the VIP applies this step.
    pub fn vip_action(&self) -> Vec2 {
        let vip = self.world.vip();
        let dest = self.destination();
        let to_dest = dest.pos - vip.pos;
        if to_dest.norm() < dest.radius {
            return Vec2::ZERO;
        }
        let ps = self.cfg.personal_space;
        let nearest = self
            .world
            .bystanders()
            .iter()
            .map(|b| b.pos.distance(vip.pos))
            .fold(f64::INFINITY, f64::min);
        let scale = ((nearest - ps) / ps).clamp(0.0, 1.0);
        to_dest.normalized().map_or(Vec2::ZERO, |u| u * (scale * self.cfg.vip_force))
    }

    /// Forces of every bystander; advances controller state (waypoint
    /// resampling, Vicsek headings).
    pub fn bystander_actions(&mut self) -> Vec<Vec2> {
        let world = &self.world;
        let speed = self.cfg.bystander_speed_frac * self.physics.max_speed;
        let eta = self.cfg.vicsek_noise;

        let old_headings: Vec<Option<f64>> = self
            .controllers
            .iter()
            .map(|c| match c {
                BystanderController::Vicsek { heading, .. } => Some(*heading),
                _ => None,
            })
            .collect();

        let mut forces = Vec::with_capacity(self.controllers.len());
        for (j, ctl) in self.controllers.iter_mut().enumerate() {
            let me = world.bystander(j);
            let f = match ctl {
                BystanderController::Waypoint { target } => {
                    let lm = world.landmark(*target);
                    if me.pos.distance(lm.pos) < lm.radius {
                        *target = pick_distinct(&mut self.rng, world.n_landmarks(), *target);
                    }
                    let goal = world.landmark(*target).pos;
                    (goal - me.pos).normalized().unwrap_or(Vec2::ZERO)
                }
                BystanderController::Vicsek { heading, waypoint } => {
                    let neighbors = world
                        .bystanders()
                        .iter()
                        .zip(&old_headings)
                        .filter(|(b, _)| b.pos.distance(me.pos) <= self.cfg.vicsek_radius)
                        .filter_map(|(_, h)| *h);
                    let noise = if eta > 0.0 {
                        self.rng.random_range(-eta..=eta)
                    } else {
                        0.0
                    };
                    let aligned = Vec2::from_angle(vicsek_heading(neighbors, noise));
                    let toward = (*waypoint - me.pos).normalized().unwrap_or(aligned);
                    let dir = (aligned * 0.5 + toward * 0.5).normalized().unwrap_or(aligned);
                    *heading = dir.angle();
                    dir * speed
                }
                BystanderController::RuleAbiding { anchor } => {
                    let mut f = ((*anchor - me.pos) * 2.0).clamp_components(-1.0, 1.0);
                    if let Some((a, _)) = self.boundary_line {
                        if me.pos.y < a.y + me.radius {
                            f.y = 1.0;
                        }
                    }
                    f
                }
                BystanderController::Unruly => {
                    (world.vip().pos - me.pos).normalized().unwrap_or(Vec2::ZERO)
                }
            };
            forces.push(f.clamp_components(-1.0, 1.0));
        }
        forces
    }

    /// Runs the scripted controllers and advances the world one step.
    pub fn step(&mut self, bodyguard_forces: &[Vec2], utterances: &[Vec<f64>]) -> Result<()> {
        let n = self.world.n_bodyguards();
        if bodyguard_forces.len() != n {
            return Err(Error::shape("bodyguard force count", n, bodyguard_forces.len()));
        }
        let mut forces = Vec::with_capacity(self.world.n_mobile());
        forces.push(self.vip_action());
        forces.extend_from_slice(bodyguard_forces);
        forces.extend(self.bystander_actions());
        sim::step_world_in_place(&mut self.world, &forces, utterances, &self.physics)?;
        if self.id == ScenarioId::Street {
            self.recycle_street_walkers();
        }
        Ok(())
    }

    /// Street walkers that reach the arena edge on their way out re-enter
    /// from the opposite edge, keeping the crowd size constant.
    fn recycle_street_walkers(&mut self) {
        let h = self.physics.arena_half_extent;
        let base = self.world.bystander_index(0);
        for (j, ctl) in self.controllers.iter().enumerate() {
            if let BystanderController::Vicsek { waypoint, .. } = ctl {
                let e = &mut self.world.entities_mut()[base + j];
                if e.pos.x.abs() >= h && e.pos.x.signum() == waypoint.x.signum() {
                    e.pos.x = -e.pos.x;
                }
            }
        }
    }

    pub fn observations(&self, spec: &ObservationSpec) -> Result<Vec<Vec<f64>>> {
        (0..self.world.n_bodyguards())
            .map(|i| sim::observe(&self.world, i, spec))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn env() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn one_hot_round_trip() {
        for id in ScenarioId::ALL {
            let g = id.one_hot();
            assert_eq!(g.iter().sum::<f64>(), 1.0);
            assert_eq!(g[id.ordinal()], 1.0);
            assert_eq!(ScenarioId::from_one_hot(&g), Some(id));
            assert_eq!(id.key().parse::<ScenarioId>().unwrap(), id);
        }
        assert_eq!(ScenarioId::from_one_hot(&[1.0, 1.0, 0.0, 0.0]), None);
        assert_eq!(ScenarioId::from_one_hot(&[0.0; 4]), None);
        assert!("nowhere".parse::<ScenarioId>().is_err());
    }

    #[test]
    fn same_seed_same_instance() {
        for id in ScenarioId::ALL {
            let a = make_scenario(id, ScenarioSeeds::single(7), &env()).unwrap();
            let b = make_scenario(id, ScenarioSeeds::single(7), &env()).unwrap();
            assert_eq!(a.world, b.world);
            assert_eq!(a.controllers, b.controllers);
            let c = make_scenario(id, ScenarioSeeds::single(8), &env()).unwrap();
            assert_ne!(a.world, c.world);
        }
    }

    #[test]
    fn population_and_landmark_counts() {
        for id in ScenarioId::ALL {
            let s = make_scenario(id, ScenarioSeeds::single(3), &env()).unwrap();
            assert_eq!(s.world.n_bodyguards(), 4);
            assert_eq!(s.world.n_bystanders(), 10);
            let vip = s.world.vip().pos;
            for g in s.world.bodyguards() {
                assert!(g.pos.distance(vip) <= 0.3 + 1e-12);
            }
            if matches!(id, ScenarioId::RandomLandmark | ScenarioId::ShoppingMall) {
                assert_eq!(s.world.n_landmarks(), 12);
            }
        }
    }

    #[test]
    fn random_landmark_start_differs_from_destination() {
        for seed in 0..50 {
            let s = make_scenario(ScenarioId::RandomLandmark, ScenarioSeeds::single(seed), &env()).unwrap();
            assert_ne!(s.world.vip().pos, s.destination().pos);
        }
    }

    #[test]
    fn pie_has_one_unruly_bystander() {
        for seed in 0..20 {
            let s = make_scenario(ScenarioId::PieInTheFace, ScenarioSeeds::single(seed), &env()).unwrap();
            assert_eq!(s.unruly_count(), 1);
            assert!(s.boundary_line.is_some());
        }
    }

    #[test]
    fn vip_stops_at_destination() {
        let mut s = make_scenario(ScenarioId::ShoppingMall, ScenarioSeeds::single(1), &env()).unwrap();
        let dest = s.destination().pos;
        s.world.entities_mut()[0].pos = dest;
        assert_eq!(s.vip_action(), Vec2::ZERO);
    }

    #[test]
    fn vip_halts_for_close_bystander() {
        let mut s = make_scenario(ScenarioId::ShoppingMall, ScenarioSeeds::single(1), &env()).unwrap();
        let vip = s.world.vip().pos;
        let ahead = (s.destination().pos - vip).normalized().unwrap() * 0.1;
        let idx = s.world.bystander_index(0);
        s.world.entities_mut()[idx].pos = vip + ahead;
        assert_eq!(s.vip_action().norm(), 0.0);
    }

    #[test]
    fn vip_full_force_with_clear_surroundings() {
        let mut e = env();
        e.scenario.vip_force = 1.0;
        let mut s = make_scenario(ScenarioId::ShoppingMall, ScenarioSeeds::single(1), &e).unwrap();
        let vip = s.world.vip().pos;
        for j in 0..s.world.n_bystanders() {
            let idx = s.world.bystander_index(j);
            // Exactly at 2x personal space: scale (0.3 - 0.15) / 0.15 = 1.
            let away = (-(s.destination().pos - vip)).normalized().unwrap() * 0.3;
            s.world.entities_mut()[idx].pos = vip + away.rotate(j as f64 * 0.1);
        }
        let f = s.vip_action();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        let want = (s.destination().pos - vip).normalized().unwrap();
        assert!((f - want).norm() < 1e-12);

        s.cfg.vip_force = 0.7;
        assert!((s.vip_action().norm() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn waypoint_walker_resamples_on_arrival() {
        let mut s = make_scenario(ScenarioId::RandomLandmark, ScenarioSeeds::single(4), &env()).unwrap();
        let BystanderController::Waypoint { target } = s.controllers[0] else {
            panic!("expected waypoint controller");
        };
        let idx = s.world.bystander_index(0);
        s.world.entities_mut()[idx].pos = s.world.landmark(target).pos;
        s.bystander_actions();
        let BystanderController::Waypoint { target: next } = s.controllers[0] else {
            unreachable!()
        };
        assert_ne!(next, target);
    }

    #[test]
    fn vicsek_alignment_oracle() {
        let theta = 0.7;
        assert!((vicsek_heading([theta; 5], 0.0) - theta).abs() < 1e-12);
        assert!((vicsek_heading([0.0, FRAC_PI_2], 0.0) - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn street_walkers_push_with_constant_magnitude() {
        let e = env();
        let mut s = make_scenario(ScenarioId::Street, ScenarioSeeds::single(2), &e).unwrap();
        let speed = e.scenario.bystander_speed_frac * e.physics.max_speed;
        for _ in 0..30 {
            let f = s.bystander_actions();
            for v in &f {
                assert!((v.norm() - speed).abs() < 1e-9);
            }
            s.step(&[Vec2::ZERO; 4], &vec![vec![0.0; 2]; 4]).unwrap();
            assert_eq!(s.world.n_bystanders(), 10);
        }
    }

    #[test]
    fn rule_abiding_stay_behind_line() {
        let e = env();
        let mut s = make_scenario(ScenarioId::PieInTheFace, ScenarioSeeds::single(11), &e).unwrap();
        let line_y = e.scenario.pie_line_offset;
        let slack = e.physics.contact_stiffness * 2.0 * e.physics.agent_radius * e.physics.dt * e.physics.dt;
        for _ in 0..25 {
            s.step(&[Vec2::ZERO; 4], &vec![vec![0.0; 2]; 4]).unwrap();
            for (j, c) in s.controllers.iter().enumerate() {
                if matches!(c, BystanderController::RuleAbiding { .. }) {
                    assert!(s.world.bystander(j).pos.y >= line_y - slack);
                }
            }
        }
    }

    #[test]
    fn vip_force_is_bounded() {
        for id in ScenarioId::ALL {
            let mut s = make_scenario(id, ScenarioSeeds::single(5), &env()).unwrap();
            for _ in 0..25 {
                assert!(s.vip_action().norm() <= 1.0 + 1e-12);
                s.step(&[Vec2::ZERO; 4], &vec![vec![0.0; 2]; 4]).unwrap();
            }
        }
    }
}
