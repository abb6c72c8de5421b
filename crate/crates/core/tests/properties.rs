use proptest::prelude::*;

use vipguard::geometry::{line_of_sight, point_segment_distance};
use vipguard::sim::{observe, step_world, Entity, ObservationSpec, PhysicsConfig};
use vipguard::threat::{bodyguard_reward, crt_step, raw_threat, residual_threat, RewardParams, ThreatParams};
use vipguard::{EntityKind, Vec2, World};

fn point() -> impl Strategy<Value = Vec2> {
    (-1.5..1.5f64, -1.5..1.5f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn velocity() -> impl Strategy<Value = Vec2> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn entity(kind: EntityKind) -> impl Strategy<Value = Entity> {
    (point(), velocity()).prop_map(move |(p, v)| {
        let mut e = Entity::new(kind, p, 0.05);
        e.vel = v;
        e
    })
}

fn world(max_guards: usize) -> impl Strategy<Value = World> {
    (
        entity(EntityKind::Vip),
        prop::collection::vec(entity(EntityKind::Bodyguard), 0..=max_guards),
        prop::collection::vec(entity(EntityKind::Bystander), 1..=10),
    )
        .prop_map(|(v, g, b)| World::new(v, g, b, vec![], 2).unwrap())
}

fn with_extra_guard(w: &World, p: Vec2) -> World {
    let mut guards = w.bodyguards().to_vec();
    guards.push(Entity::new(EntityKind::Bodyguard, p, 0.05));
    World::new(w.vip().clone(), guards, w.bystanders().to_vec(), vec![], 2).unwrap()
}

fn forces(n: usize) -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((-1.0..=1.0f64, -1.0..=1.0f64).prop_map(|(x, y)| Vec2::new(x, y)), n)
}

fn band() -> RewardParams {
    RewardParams {
        alpha: 2.5,
        beta: 2.0,
        min_dist: 0.1,
        safe_dist: 0.6,
    }
}

proptest! {
    #[test]
    fn residual_threat_never_exceeds_threat_level(w in world(4)) {
        let p = ThreatParams::default();
        for j in 0..w.n_bystanders() {
            let rt = residual_threat(&w, j, &p);
            prop_assert!(rt <= raw_threat(&w, j, &p));
            prop_assert!((0.0..=1.0).contains(&rt));
        }
    }

    #[test]
    fn extra_bodyguard_never_raises_threat(w in world(3), p in point()) {
        let tp = ThreatParams::default();
        let more = with_extra_guard(&w, p);
        for j in 0..w.n_bystanders() {
            prop_assert!(residual_threat(&more, j, &tp) <= residual_threat(&w, j, &tp));
        }
        prop_assert!(crt_step(&more, &tp) <= crt_step(&w, &tp));
    }

    #[test]
    fn crt_step_and_reward_bounds(w in world(4)) {
        let tp = ThreatParams::default();
        let c = crt_step(&w, &tp);
        prop_assert!((0.0..=1.0).contains(&c));
        let rp = band();
        for i in 0..w.n_bodyguards() {
            let r = bodyguard_reward(&w, i, &tp, &rp);
            prop_assert!(r <= 0.0 && r >= -(rp.alpha + rp.beta));
        }
    }

    #[test]
    fn occlusion_is_monotone(a in point(), b in point(), blockers in prop::collection::vec((point(), 0.01..0.3f64), 0..5), extra in (point(), 0.01..0.3f64)) {
        prop_assume!(a.distance(b) > 1e-9);
        let before = line_of_sight(a, b, blockers.iter().copied());
        let after = line_of_sight(a, b, blockers.iter().copied().chain([extra]));
        prop_assert!(before || !after);
    }

    #[test]
    fn segment_distance_matches_dense_sampling(p in point(), a in point(), b in point()) {
        let d = point_segment_distance(p, a, b);
        let sampled = (0..=2000)
            .map(|k| p.distance(a + (b - a) * (k as f64 / 2000.0)))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(d <= sampled + 1e-12);
        prop_assert!(sampled - d <= a.distance(b) / 2000.0 + 1e-12);
    }

    #[test]
    fn translation_invariance(w in world(4), off in point()) {
        let tp = ThreatParams::default();
        let mut moved = w.clone();
        moved.translate(off);
        for j in 0..w.n_bystanders() {
            let (x, y) = (residual_threat(&w, j, &tp), residual_threat(&moved, j, &tp));
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
        let rp = band();
        for i in 0..w.n_bodyguards() {
            let (x, y) = (bodyguard_reward(&w, i, &tp, &rp), bodyguard_reward(&moved, i, &tp, &rp));
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn stepping_is_deterministic_and_speed_bounded(w in world(4), f in forces(15)) {
        let cfg = PhysicsConfig::default();
        let n = w.n_mobile();
        let f = &f[..n];
        let u = vec![vec![0.25, -0.5]; w.n_bodyguards()];
        let a = step_world(&w, f, &u, &cfg).unwrap();
        let b = step_world(&w, f, &u, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        for e in &a.entities()[..n] {
            prop_assert!(e.vel.norm() <= cfg.max_speed + 1e-12);
            prop_assert!(e.pos.x.abs() <= cfg.arena_half_extent && e.pos.y.abs() <= cfg.arena_half_extent);
        }
        prop_assert_eq!(a.sim_time(), w.sim_time() + 1);
        prop_assert_eq!(a.utterances(), &u[..]);
    }

    #[test]
    fn observation_is_pure_with_closed_form_length(w in world(4), m in 1usize..=10, c in 0usize..4) {
        prop_assume!(w.n_bodyguards() > 0 && m <= w.n_bystanders());
        let w = World::new(w.vip().clone(), w.bodyguards().to_vec(), w.bystanders().to_vec(), vec![], c).unwrap();
        let spec = ObservationSpec { nearest_bystanders: m, comm_dim: c };
        let before = w.clone();
        let n = w.n_bodyguards();
        for i in 0..n {
            let o = observe(&w, i, &spec).unwrap();
            prop_assert_eq!(o.len(), 8 + 4 * m + (n - 1) * (4 + c));
            prop_assert_eq!(o, observe(&w, i, &spec).unwrap());
        }
        prop_assert_eq!(w, before);
    }
}

#[test]
fn rejects_out_of_box_forces_and_nan() {
    let w = World::new(
        Entity::new(EntityKind::Vip, Vec2::ZERO, 0.05),
        vec![Entity::new(EntityKind::Bodyguard, Vec2::new(0.3, 0.0), 0.05)],
        vec![Entity::new(EntityKind::Bystander, Vec2::new(-0.3, 0.0), 0.05)],
        vec![],
        1,
    )
    .unwrap();
    let cfg = PhysicsConfig::default();
    let u = vec![vec![0.0]];
    let ok = vec![Vec2::ZERO; 3];
    assert!(step_world(&w, &ok, &u, &cfg).is_ok());
    let mut big = ok.clone();
    big[1] = Vec2::new(1.5, 0.0);
    assert!(step_world(&w, &big, &u, &cfg).is_err());
    let mut nan = ok.clone();
    nan[2] = Vec2::new(f64::NAN, 0.0);
    assert!(step_world(&w, &nan, &u, &cfg).is_err());
    assert!(step_world(&w, &ok[..2], &u, &cfg).is_err());
    assert!(step_world(&w, &ok, &[vec![0.0, 0.0]], &cfg).is_err());
}
