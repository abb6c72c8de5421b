//! Run configuration.
//!
//! A run is fully described by a [`RunConfig`]. On disk it is a flat list of
//! `dotted.key = value` lines (valid TOML); every key has a default and
//! unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenario::{ScenarioConfig, ScenarioId};
use crate::seeds::ScenarioSeeds;
use crate::sim::{ObservationSpec, PhysicsConfig};
use crate::threat::{RewardParams, ThreatParams};

/// Reward weights `(alpha, beta)` per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioWeights {
    pub weights: [(f64, f64); ScenarioId::COUNT],
}

impl Default for ScenarioWeights {
    fn default() -> Self {
        Self {
            weights: [(2.0, 2.0), (2.0, 1.0), (2.5, 2.0), (4.0, 1.0)],
        }
    }
}

/// Everything needed to build and score an episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub physics: PhysicsConfig,
    pub threat: ThreatParams,
    pub reward: RewardBand,
    pub weights: ScenarioWeights,
    pub observation: ObservationSpec,
    pub scenario: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBand {
    pub min_dist: f64,
}

impl Default for RewardBand {
    fn default() -> Self {
        Self { min_dist: 0.1 }
    }
}

impl EnvConfig {
    pub fn reward_params(&self, id: ScenarioId) -> RewardParams {
        let (alpha, beta) = self.weights.weights[id.ordinal()];
        RewardParams {
            alpha,
            beta,
            min_dist: self.reward.min_dist,
            safe_dist: self.threat.safe_dist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.threat.validate()?;
        self.scenario.validate()?;
        for id in ScenarioId::ALL {
            self.reward_params(id).validate()?;
        }
        let m = self.observation.nearest_bystanders;
        if m == 0 || m > self.scenario.n_bystanders {
            return Err(Error::config(format!(
                "observation.nearest_bystanders must be in [1, {}]",
                self.scenario.n_bystanders
            )));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.observation.obs_dim(self.scenario.n_bodyguards)
    }

    /// Force plus utterance.
    pub fn action_dim(&self) -> usize {
        2 + self.observation.comm_dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One fixed scenario, no scenario input.
    MaddpgSingle,
    /// Scenario sampled per episode, but networks never see it.
    MaddpgSampled,
    /// Scenario-conditioned actors and critics.
    MaupgNoHindsight,
    /// Scenario-conditioned, with every episode also stored under a second
    /// sampled scenario's reward.
    Maupg,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [
        TrainMode::MaddpgSingle,
        TrainMode::MaddpgSampled,
        TrainMode::MaupgNoHindsight,
        TrainMode::Maupg,
    ];

    pub fn key(self) -> &'static str {
        match self {
            TrainMode::MaddpgSingle => "maddpg_single",
            TrainMode::MaddpgSampled => "maddpg_sampled",
            TrainMode::MaupgNoHindsight => "maupg_no_hindsight",
            TrainMode::Maupg => "maupg",
        }
    }

    pub fn conditions_on_scenario(self) -> bool {
        matches!(self, TrainMode::MaupgNoHindsight | TrainMode::Maupg)
    }

    pub fn hindsight(self) -> bool {
        self == TrainMode::Maupg
    }

    pub fn samples_scenarios(self) -> bool {
        self != TrainMode::MaddpgSingle
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        TrainMode::ALL
            .into_iter()
            .find(|m| m.key() == norm)
            .ok_or_else(|| Error::config(format!("unknown training mode `{s}`")))
    }
}

/// Episode budgets used by the full-budget preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeBudgets {
    pub per_scenario: [usize; ScenarioId::COUNT],
    pub universal: usize,
}

impl Default for EpisodeBudgets {
    fn default() -> Self {
        Self {
            per_scenario: [8000, 5000, 5000, 5000],
            universal: 9000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub polyak_decay: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub episode_length: usize,
    pub cycles_per_episode: usize,
    pub hidden_units: usize,
    pub noise_initial: f64,
    pub noise_final: f64,
    /// Fraction of the episode budget over which exploration noise anneals.
    pub noise_anneal_fraction: f64,
    /// Quadratic penalty on actor outputs beyond [-1, 1].
    pub action_bound_penalty: f64,
    /// Global gradient-norm clip; infinite means no clipping.
    pub max_grad_norm: f64,
    /// Episodes between checkpoints; 0 writes only the final checkpoint.
    pub checkpoint_interval: usize,
    pub budgets: EpisodeBudgets,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            polyak_decay: 0.99,
            lr: 1e-3,
            batch_size: 1024,
            buffer_capacity: 10_000_000,
            episode_length: 25,
            cycles_per_episode: 4,
            hidden_units: 64,
            noise_initial: 0.3,
            noise_final: 0.05,
            noise_anneal_fraction: 0.5,
            action_bound_penalty: 1e-3,
            max_grad_norm: f64::INFINITY,
            checkpoint_interval: 1000,
            budgets: EpisodeBudgets::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("train.gamma must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.polyak_decay) {
            return Err(Error::config("train.polyak_decay must be in [0, 1]"));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::config("train.lr must be >= 0"));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::config("train.batch_size must be in [1, train.buffer_capacity]"));
        }
        if self.episode_length == 0 || self.hidden_units == 0 {
            return Err(Error::config("train.episode_length and train.hidden_units must be > 0"));
        }
        if !(self.noise_initial >= 0.0 && self.noise_final >= 0.0) {
            return Err(Error::config("exploration noise must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.noise_anneal_fraction) {
            return Err(Error::config("train.noise_anneal_fraction must be in [0, 1]"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::config("train.max_grad_norm must be > 0"));
        }
        Ok(())
    }

    /// Exploration sigma for `episode` out of `total`: linear from
    /// `noise_initial` to `noise_final`, then flat.
    pub fn noise_sigma(&self, episode: usize, total: usize) -> f64 {
        let horizon = self.noise_anneal_fraction * total as f64;
        if horizon <= 0.0 || episode as f64 >= horizon {
            return self.noise_final;
        }
        let frac = episode as f64 / horizon;
        self.noise_initial + (self.noise_final - self.noise_initial) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QlbParams {
    /// Distance of each bodyguard post from the VIP.
    pub standoff: f64,
    /// Proportional gain on the post error.
    pub gain: f64,
    /// Bystanders within this distance of the VIP are balanced.
    pub awareness: f64,
}

impl Default for QlbParams {
    fn default() -> Self {
        Self {
            standoff: 0.12,
            gain: 20.0,
            awareness: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub landmark: u64,
    pub bystander: u64,
    pub train: u64,
    pub eval: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            landmark: 1,
            bystander: 2,
            train: 0,
            eval: 0,
        }
    }
}

impl SeedConfig {
    fn base(&self, run: u64) -> ScenarioSeeds {
        ScenarioSeeds::for_run(
            ScenarioSeeds {
                landmark: self.landmark,
                bystander: self.bystander,
            },
            run,
        )
    }

    /// Base scenario seeds of training episodes.
    pub fn train_base(&self) -> ScenarioSeeds {
        self.base(self.train)
    }

    /// Base scenario seeds of evaluation episodes; pass to
    /// [`crate::marl::evaluate`], which adds the evaluation offset.
    pub fn eval_base(&self) -> ScenarioSeeds {
        self.base(self.eval)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub qlb: QlbParams,
    pub seeds: SeedConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("invalid value `{value}` for key `{key}`")))
}

fn scenario_from_key(name: &str) -> Option<ScenarioId> {
    ScenarioId::ALL.into_iter().find(|id| id.key() == name)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        if !(self.qlb.standoff > 0.0 && self.qlb.gain > 0.0 && self.qlb.awareness > 0.0) {
            return Err(Error::config("qlb parameters must be > 0"));
        }
        Ok(())
    }

    /// All keys with their current values, in file order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let e = &self.env;
        let t = &self.train;
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));

        put("physics.dt", e.physics.dt.to_string());
        put("physics.damping", e.physics.damping.to_string());
        put("physics.max_speed", e.physics.max_speed.to_string());
        put("physics.contact_stiffness", e.physics.contact_stiffness.to_string());
        put("physics.arena_half_extent", e.physics.arena_half_extent.to_string());
        put("physics.agent_radius", e.physics.agent_radius.to_string());
        put("physics.landmark_radius", e.physics.landmark_radius.to_string());

        put("threat.a", e.threat.a.to_string());
        put("threat.b", e.threat.b.to_string());
        put("threat.safe_dist", e.threat.safe_dist.to_string());
        put("reward.min_dist", e.reward.min_dist.to_string());
        for id in ScenarioId::ALL {
            let (alpha, beta) = e.weights.weights[id.ordinal()];
            put(&format!("reward.{}.alpha", id.key()), alpha.to_string());
            put(&format!("reward.{}.beta", id.key()), beta.to_string());
        }

        put("observation.nearest_bystanders", e.observation.nearest_bystanders.to_string());
        put("observation.comm_dim", e.observation.comm_dim.to_string());

        let s = &e.scenario;
        put("scenario.n_bodyguards", s.n_bodyguards.to_string());
        put("scenario.n_bystanders", s.n_bystanders.to_string());
        put("scenario.personal_space", s.personal_space.to_string());
        put("scenario.bodyguard_spawn_radius", s.bodyguard_spawn_radius.to_string());
        put("scenario.bystander_clearance", s.bystander_clearance.to_string());
        put("scenario.vicsek_radius", s.vicsek_radius.to_string());
        put("scenario.vicsek_noise", s.vicsek_noise.to_string());
        put("scenario.bystander_speed_frac", s.bystander_speed_frac.to_string());
        put("scenario.vip_force", s.vip_force.to_string());
        put("scenario.pie_line_offset", s.pie_line_offset.to_string());
        put("scenario.pie_crowd_near", s.pie_crowd_near.to_string());
        put("scenario.pie_crowd_far", s.pie_crowd_far.to_string());

        put("train.gamma", t.gamma.to_string());
        put("train.polyak_decay", t.polyak_decay.to_string());
        put("train.lr", t.lr.to_string());
        put("train.batch_size", t.batch_size.to_string());
        put("train.buffer_capacity", t.buffer_capacity.to_string());
        put("train.episode_length", t.episode_length.to_string());
        put("train.cycles_per_episode", t.cycles_per_episode.to_string());
        put("train.hidden_units", t.hidden_units.to_string());
        put("train.noise_initial", t.noise_initial.to_string());
        put("train.noise_final", t.noise_final.to_string());
        put("train.noise_anneal_fraction", t.noise_anneal_fraction.to_string());
        put("train.action_bound_penalty", t.action_bound_penalty.to_string());
        put("train.max_grad_norm", t.max_grad_norm.to_string());
        put("train.checkpoint_interval", t.checkpoint_interval.to_string());
        for id in ScenarioId::ALL {
            put(
                &format!("train.episodes.{}", id.key()),
                t.budgets.per_scenario[id.ordinal()].to_string(),
            );
        }
        put("train.episodes.universal", t.budgets.universal.to_string());

        put("qlb.standoff", self.qlb.standoff.to_string());
        put("qlb.gain", self.qlb.gain.to_string());
        put("qlb.awareness", self.qlb.awareness.to_string());

        put("seeds.landmark", self.seeds.landmark.to_string());
        put("seeds.bystander", self.seeds.bystander.to_string());
        put("seeds.train", self.seeds.train.to_string());
        put("seeds.eval", self.seeds.eval.to_string());
        out
    }

    /// Sets one dotted key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.env;
        let t = &mut self.train;
        let v = value;
        match key {
            "physics.dt" => e.physics.dt = parse(key, v)?,
            "physics.damping" => e.physics.damping = parse(key, v)?,
            "physics.max_speed" => e.physics.max_speed = parse(key, v)?,
            "physics.contact_stiffness" => e.physics.contact_stiffness = parse(key, v)?,
            "physics.arena_half_extent" => e.physics.arena_half_extent = parse(key, v)?,
            "physics.agent_radius" => e.physics.agent_radius = parse(key, v)?,
            "physics.landmark_radius" => e.physics.landmark_radius = parse(key, v)?,
            "threat.a" => e.threat.a = parse(key, v)?,
            "threat.b" => e.threat.b = parse(key, v)?,
            "threat.safe_dist" => e.threat.safe_dist = parse(key, v)?,
            "reward.min_dist" => e.reward.min_dist = parse(key, v)?,
            "observation.nearest_bystanders" => e.observation.nearest_bystanders = parse(key, v)?,
            "observation.comm_dim" => e.observation.comm_dim = parse(key, v)?,
            "scenario.n_bodyguards" => e.scenario.n_bodyguards = parse(key, v)?,
            "scenario.n_bystanders" => e.scenario.n_bystanders = parse(key, v)?,
            "scenario.personal_space" => e.scenario.personal_space = parse(key, v)?,
            "scenario.bodyguard_spawn_radius" => e.scenario.bodyguard_spawn_radius = parse(key, v)?,
            "scenario.bystander_clearance" => e.scenario.bystander_clearance = parse(key, v)?,
            "scenario.vicsek_radius" => e.scenario.vicsek_radius = parse(key, v)?,
            "scenario.vicsek_noise" => e.scenario.vicsek_noise = parse(key, v)?,
            "scenario.bystander_speed_frac" => e.scenario.bystander_speed_frac = parse(key, v)?,
            "scenario.vip_force" => e.scenario.vip_force = parse(key, v)?,
            "scenario.pie_line_offset" => e.scenario.pie_line_offset = parse(key, v)?,
            "scenario.pie_crowd_near" => e.scenario.pie_crowd_near = parse(key, v)?,
            "scenario.pie_crowd_far" => e.scenario.pie_crowd_far = parse(key, v)?,
            "train.gamma" => t.gamma = parse(key, v)?,
            "train.polyak_decay" => t.polyak_decay = parse(key, v)?,
            "train.lr" => t.lr = parse(key, v)?,
            "train.batch_size" => t.batch_size = parse(key, v)?,
            "train.buffer_capacity" => t.buffer_capacity = parse(key, v)?,
            "train.episode_length" => t.episode_length = parse(key, v)?,
            "train.cycles_per_episode" => t.cycles_per_episode = parse(key, v)?,
            "train.hidden_units" => t.hidden_units = parse(key, v)?,
            "train.noise_initial" => t.noise_initial = parse(key, v)?,
            "train.noise_final" => t.noise_final = parse(key, v)?,
            "train.noise_anneal_fraction" => t.noise_anneal_fraction = parse(key, v)?,
            "train.action_bound_penalty" => t.action_bound_penalty = parse(key, v)?,
            "train.max_grad_norm" => t.max_grad_norm = parse(key, v)?,
            "train.checkpoint_interval" => t.checkpoint_interval = parse(key, v)?,
            "train.episodes.universal" => t.budgets.universal = parse(key, v)?,
            "qlb.standoff" => self.qlb.standoff = parse(key, v)?,
            "qlb.gain" => self.qlb.gain = parse(key, v)?,
            "qlb.awareness" => self.qlb.awareness = parse(key, v)?,
            "seeds.landmark" => self.seeds.landmark = parse(key, v)?,
            "seeds.bystander" => self.seeds.bystander = parse(key, v)?,
            "seeds.train" => self.seeds.train = parse(key, v)?,
            "seeds.eval" => self.seeds.eval = parse(key, v)?,
            _ => return self.set_per_scenario(key, value),
        }
        Ok(())
    }

    fn set_per_scenario(&mut self, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::config(format!("unknown config key `{key}`"));
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["reward", name, field] => {
                let id = scenario_from_key(name).ok_or_else(unknown)?;
                let w = &mut self.env.weights.weights[id.ordinal()];
                match *field {
                    "alpha" => w.0 = parse(key, value)?,
                    "beta" => w.1 = parse(key, value)?,
                    _ => return Err(unknown()),
                }
            }
            ["train", "episodes", name] => {
                let id = scenario_from_key(name).ok_or_else(unknown)?;
                self.train.budgets.per_scenario[id.ordinal()] = parse(key, value)?;
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Canonical file text: one `key = value` line per key.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            s.push_str(&k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Parses a config file on top of the defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_config_str(text)?;
        Ok(cfg)
    }

    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(format!("config syntax: {}", e.message())))?;
        let mut flat = Vec::new();
        flatten("", &toml::Value::Table(table), &mut flat)?;
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Content hash of the canonical config text, framed like a git blob.
    pub fn content_hash(&self) -> String {
        let text = self.to_config_string();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) -> Result<()> {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out)?;
            }
        }
        toml::Value::Integer(i) => out.push((prefix.to_string(), i.to_string())),
        toml::Value::Float(f) => out.push((prefix.to_string(), f.to_string())),
        toml::Value::Boolean(b) => out.push((prefix.to_string(), b.to_string())),
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        _ => return Err(Error::config(format!("unsupported value for key `{prefix}`"))),
    }
    Ok(())
}
