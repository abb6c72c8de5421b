//! Quadrant load balancing (QLB): a hand-written formation controller.
//!
//! The space around the VIP is split into four quadrants in the VIP's
//! heading frame (front, left, back, right). Each bodyguard owns one
//! quadrant and holds a post on the quadrant bisector, pulled toward the
//! angular centroid of the bystanders currently inside that quadrant. The
//! busiest quadrant picks its bodyguard first.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::config::QlbParams;
use crate::error::{Error, Result};
use crate::geometry::{circular_mean, wrap_angle, Vec2};
use crate::sim::{PhysicsConfig, World};

pub const QUADRANTS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct QlbState {
    /// `assignment[i]` is the quadrant served by bodyguard `i`.
    pub assignment: [usize; QUADRANTS],
    /// Unit heading of the VIP frame; kept while the VIP stands still.
    pub heading: Vec2,
}

impl Default for QlbState {
    fn default() -> Self {
        Self {
            assignment: [0, 1, 2, 3],
            heading: Vec2::new(1.0, 0.0),
        }
    }
}

impl QlbState {
    pub fn is_bijection(&self) -> bool {
        let mut seen = [false; QUADRANTS];
        for &q in &self.assignment {
            if q >= QUADRANTS || seen[q] {
                return false;
            }
            seen[q] = true;
        }
        true
    }
}

/// Quadrant of a direction given as an angle relative to the heading.
pub fn quadrant_of(relative_angle: f64) -> usize {
    let shifted = wrap_angle(relative_angle) + FRAC_PI_4;
    (shifted.div_euclid(FRAC_PI_2) as i64).rem_euclid(QUADRANTS as i64) as usize
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadrantLoad {
    pub count: usize,
    /// Angular centroid relative to the heading, if any bystander is inside.
    pub centroid: Option<f64>,
    pub nearest: f64,
}

/// Counts the bystanders within `awareness` of the VIP per quadrant.
pub fn quadrant_loads(world: &World, heading: Vec2, awareness: f64) -> [QuadrantLoad; QUADRANTS] {
    let vip = world.vip().pos;
    let base = heading.angle();
    let mut angles: [Vec<f64>; QUADRANTS] = Default::default();
    let mut loads: [QuadrantLoad; QUADRANTS] = Default::default();
    for l in &mut loads {
        l.nearest = f64::INFINITY;
    }
    for b in world.bystanders() {
        let rel = b.pos - vip;
        let dist = rel.norm();
        if dist >= awareness || dist == 0.0 {
            continue;
        }
        let phi = wrap_angle(rel.angle() - base);
        let q = quadrant_of(phi);
        angles[q].push(phi);
        loads[q].count += 1;
        loads[q].nearest = loads[q].nearest.min(dist);
    }
    for (l, a) in loads.iter_mut().zip(angles) {
        l.centroid = circular_mean(a);
    }
    loads
}

/// Post of quadrant `q` in world coordinates.
pub fn quadrant_post(world: &World, heading: Vec2, q: usize, load: &QuadrantLoad, params: &QlbParams) -> Vec2 {
    let bisector = q as f64 * FRAC_PI_2;
    let angle = match load.centroid {
        Some(c) => bisector + wrap_angle(c - bisector).clamp(-FRAC_PI_4, FRAC_PI_4),
        None => bisector,
    };
    let min_radius = 2.0 * world.vip().radius;
    let radius = if load.count > 0 {
        params.standoff.min((0.5 * load.nearest).max(min_radius))
    } else {
        params.standoff
    };
    world.vip().pos + heading.rotate(angle) * radius
}

/// One control step for four bodyguards. Updates the quadrant assignment and
/// heading in `state` and returns one force per bodyguard.
pub fn qlb_actions(
    world: &World,
    state: &mut QlbState,
    params: &QlbParams,
    physics: &PhysicsConfig,
) -> Result<Vec<Vec2>> {
    if world.n_bodyguards() != QUADRANTS {
        return Err(Error::shape("QLB bodyguard count", QUADRANTS, world.n_bodyguards()));
    }
    let vip = world.vip();
    if let Some(h) = vip.vel.normalized().filter(|_| vip.vel.norm() > 1e-3) {
        state.heading = h;
    }
    let heading = state.heading;
    let loads = quadrant_loads(world, heading, params.awareness);
    let posts: Vec<Vec2> = (0..QUADRANTS)
        .map(|q| quadrant_post(world, heading, q, &loads[q], params))
        .collect();

    let mut order: Vec<usize> = (0..QUADRANTS).collect();
    order.sort_by(|&a, &b| loads[b].count.cmp(&loads[a].count).then(a.cmp(&b)));
    let mut taken = [false; QUADRANTS];
    for q in order {
        let mut best: Option<(f64, usize)> = None;
        for (i, g) in world.bodyguards().iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = g.pos.distance(posts[q]);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("one free bodyguard per quadrant");
        taken[i] = true;
        state.assignment[i] = q;
    }

    let feedforward = physics.cruise_force(vip.vel);
    Ok(world
        .bodyguards()
        .iter()
        .zip(state.assignment)
        .map(|(g, q)| (feedforward + (posts[q] - g.pos) * params.gain).clamp_components(-1.0, 1.0))
        .collect())
}
