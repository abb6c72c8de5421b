//! Browser bindings: scenario playback under the scripted controllers, a
//! residual threat heatmap around the VIP and the threat level curve.

use wasm_bindgen::prelude::*;

use vipguard::config::EnvConfig;
use vipguard::geometry::line_of_sight;
use vipguard::marl::{BodyguardController, QlbController, RandomPolicy, StationaryGuards};
use vipguard::seeds::{self, ScenarioSeeds};
use vipguard::threat::{crt_step, threat_level};
use vipguard::{EntityKind, ScenarioId, ScenarioInstance, Vec2};

fn controller(name: &str, seed: u64) -> vipguard::Result<Box<dyn BodyguardController>> {
    Ok(match name {
        "qlb" => Box::new(QlbController::default()),
        "none" => Box::new(StationaryGuards),
        "random" => Box::new(RandomPolicy {
            rng: seeds::rng(seed, seeds::stream::RANDOM_POLICY),
        }),
        other => return Err(vipguard::Error::Config(format!("unknown controller `{other}`"))),
    })
}

fn js(e: vipguard::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn kind_code(k: EntityKind) -> f64 {
    match k {
        EntityKind::Vip => 0.0,
        EntityKind::Bodyguard => 1.0,
        EntityKind::Bystander => 2.0,
        EntityKind::Landmark => 3.0,
    }
}

/// A running scenario instance.
#[wasm_bindgen]
pub struct Lab {
    env: EnvConfig,
    inst: ScenarioInstance,
    controller: Box<dyn BodyguardController>,
    crt: f64,
}

impl Lab {
    pub fn create(scenario: &str, controller_name: &str, seed: u64) -> vipguard::Result<Self> {
        let env = EnvConfig::default();
        let id: ScenarioId = scenario.parse()?;
        let inst = vipguard::scenario::make_scenario(id, ScenarioSeeds::single(seed), &env)?;
        let mut controller = controller(controller_name, seed)?;
        controller.reset(&inst)?;
        Ok(Self {
            env,
            inst,
            controller,
            crt: 0.0,
        })
    }

    pub fn advance(&mut self) -> vipguard::Result<f64> {
        let obs = self.inst.observations(&self.env.observation)?;
        let actions = self.controller.act(&self.inst, &obs)?;
        let forces: Vec<Vec2> = actions.iter().map(|a| Vec2::new(a[0], a[1])).collect();
        let utter: Vec<Vec<f64>> = actions.iter().map(|a| a[2..].to_vec()).collect();
        self.inst.step(&forces, &utter)?;
        let c = crt_step(&self.inst.world, &self.env.threat);
        self.crt += c * self.inst.physics().dt;
        Ok(c)
    }
}

#[wasm_bindgen]
impl Lab {
    /// `scenario` is one of `random_landmark`, `shopping_mall`, `street`,
    /// `pie_in_the_face`; `controller` is `qlb`, `none` or `random`.
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, controller: &str, seed: u64) -> Result<Lab, JsError> {
        Self::create(scenario, controller, seed).map_err(js)
    }

    /// Advances one step and returns the instantaneous combined threat.
    pub fn step(&mut self) -> Result<f64, JsError> {
        self.advance().map_err(js)
    }

    pub fn crt(&self) -> f64 {
        self.crt
    }

    pub fn time(&self) -> u64 {
        self.inst.world.sim_time()
    }

    pub fn arena(&self) -> f64 {
        self.inst.physics().arena_half_extent
    }

    /// Flat `[kind, x, y, radius]` per entity; kind 0 VIP, 1 bodyguard,
    /// 2 bystander, 3 landmark.
    pub fn entities(&self) -> Vec<f64> {
        self.inst
            .world
            .entities()
            .iter()
            .flat_map(|e| [kind_code(e.kind), e.pos.x, e.pos.y, e.radius])
            .collect()
    }

    /// Residual threat a bystander would pose at each cell of a
    /// `resolution x resolution` grid over the arena, row-major from the
    /// top-left corner.
    pub fn heatmap(&self, resolution: usize) -> Vec<f64> {
        let world = &self.inst.world;
        let half = self.arena();
        let vip = world.vip().pos;
        let cell = 2.0 * half / resolution as f64;
        let mut out = Vec::with_capacity(resolution * resolution);
        for r in 0..resolution {
            for c in 0..resolution {
                let p = Vec2::new(-half + (c as f64 + 0.5) * cell, half - (r as f64 + 0.5) * cell);
                let d = p.distance(vip);
                let los = d < self.env.threat.safe_dist && line_of_sight(vip, p, world.bodyguard_disks());
                out.push(threat_level(d, los, &self.env.threat));
            }
        }
        out
    }
}

/// Threat level with line of sight at `samples` evenly spaced distances in
/// `[0, max_dist]`.
#[wasm_bindgen]
pub fn threat_curve(samples: usize, max_dist: f64) -> Vec<f64> {
    let p = EnvConfig::default().threat;
    let n = samples.max(2);
    (0..n)
        .map(|k| threat_level(max_dist * k as f64 / (n - 1) as f64, true, &p))
        .collect()
}
