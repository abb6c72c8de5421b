use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nets::Team;
use crate::config::{RunConfig, TrainMode};
use crate::error::{Error, Result};
use crate::scenario::ScenarioId;

pub const CHECKPOINT_FORMAT: &str = "vipguard-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Networks, optimizer moments and random streams of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Canonical config text the run was started with.
    pub config_text: String,
    pub config_hash: String,
    pub mode: TrainMode,
    pub scenarios: Vec<ScenarioId>,
    pub total_episodes: usize,
    /// Episodes completed.
    pub episode: usize,
    pub next_scenario: ScenarioId,
    pub team: Team,
    /// Scenario-sampling, exploration and minibatch streams.
    pub rngs: [ChaCha8Rng; 3],
}

impl Checkpoint {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        config: &RunConfig,
        mode: TrainMode,
        scenarios: &[ScenarioId],
        total_episodes: usize,
        episode: usize,
        next_scenario: ScenarioId,
        team: Team,
        rngs: [ChaCha8Rng; 3],
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config_text: config.to_config_string(),
            config_hash: config.content_hash(),
            mode,
            scenarios: scenarios.to_vec(),
            total_episodes,
            episode,
            next_scenario,
            team,
            rngs,
        }
    }

    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_config_str(&self.config_text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or_default();
        if format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("checkpoint: format field is `{format}`")));
        }
        let version = v.get("version").and_then(|f| f.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                kind: "checkpoint",
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(serde_json::from_value(v)?)
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
        let tmp = dir.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
