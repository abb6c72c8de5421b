//! Run artifacts: training curves, run manifests and evaluation tables.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::marl::{EpisodeRecord, EvalReport, EVAL_REPORT_SCHEMA};
use crate::scenario::ScenarioId;

pub const CURVE_HEADER: &str = "episode,mode,scenario,mean_agent_reward,episode_crt,noise_sigma";
pub const MANIFEST_SCHEMA: u32 = 1;
pub const TABLE_SCHEMA: u32 = 1;

/// A JSON artifact carrying a `schema_version` field.
pub trait Versioned: Serialize + DeserializeOwned {
    const KIND: &'static str;
    const SCHEMA: u32;
}

/// Parses a versioned artifact, rejecting other schema versions before
/// looking at the rest of the document.
pub fn read_json<T: Versioned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format(format!("{}: missing schema_version", T::KIND)))?;
    if found != T::SCHEMA as u64 {
        return Err(Error::Version {
            kind: T::KIND,
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: T::SCHEMA,
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn write_json<T: Versioned>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl Versioned for RunManifest {
    const KIND: &'static str = "run manifest";
    const SCHEMA: u32 = MANIFEST_SCHEMA;
}

impl Versioned for CrossEvalTable {
    const KIND: &'static str = "cross-eval table";
    const SCHEMA: u32 = TABLE_SCHEMA;
}

impl Versioned for AblationTable {
    const KIND: &'static str = "ablation table";
    const SCHEMA: u32 = TABLE_SCHEMA;
}

impl Versioned for EvalReport {
    const KIND: &'static str = "eval report";
    const SCHEMA: u32 = EVAL_REPORT_SCHEMA;
}

/// One row of a training curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub mode: String,
    pub scenario: String,
    pub mean_agent_reward: f64,
    pub episode_crt: f64,
    pub noise_sigma: f64,
}

impl From<&EpisodeRecord> for CurveRow {
    fn from(r: &EpisodeRecord) -> Self {
        Self {
            episode: r.episode,
            mode: r.mode.key().to_string(),
            scenario: r.scenario.key().to_string(),
            mean_agent_reward: r.mean_agent_reward,
            episode_crt: r.episode_crt,
            noise_sigma: r.noise_sigma,
        }
    }
}

/// Streams curve rows as CSV; the header is written on creation.
pub struct CurveWriter<W: Write> {
    out: W,
}

impl<W: Write> CurveWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{CURVE_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &CurveRow) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            row.episode, row.mode, row.scenario, row.mean_agent_reward, row.episode_crt, row.noise_sigma
        )
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_curve(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CURVE_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "curve: header is `{}`, expected `{CURVE_HEADER}`",
                other.unwrap_or_default()
            )))
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("curve: line {}", n + 2));
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        rows.push(CurveRow {
            episode: f[0].parse().map_err(|_| bad())?,
            mode: f[1].to_string(),
            scenario: f[2].to_string(),
            mean_agent_reward: f[3].parse().map_err(|_| bad())?,
            episode_crt: f[4].parse().map_err(|_| bad())?,
            noise_sigma: f[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

/// Resolved configuration and identity of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    #[serde(default)]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.to_pairs().into_iter().collect(),
            config_hash: config.content_hash(),
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.details.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(self)
    }
}

/// Mean held-out CRT of policies trained on one scenario (rows) evaluated
/// on every scenario (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalTable {
    pub schema_version: u32,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    pub rows: Vec<String>,
    pub cols: Vec<ScenarioId>,
    pub mean_crt: Vec<Vec<f64>>,
    pub std_crt: Vec<Vec<f64>>,
}

impl CrossEvalTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trained_on");
        for c in &self.cols {
            s.push(',');
            s.push_str(c.key());
        }
        s.push('\n');
        for (r, row) in self.rows.iter().zip(&self.mean_crt) {
            s.push_str(r);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Held-out CRT of each training mode, per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub schema_version: u32,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    pub final_window: usize,
    pub scenarios: Vec<ScenarioId>,
    pub rungs: Vec<AblationRung>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRung {
    pub mode: String,
    pub mean_crt: Vec<f64>,
    pub std_crt: Vec<f64>,
    /// Mean over scenarios.
    pub overall_crt: f64,
    /// Mean training reward over the last `final_window` episodes.
    pub final_mean_reward: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainMode;

    #[test]
    fn curve_round_trip() {
        let rec = EpisodeRecord {
            episode: 3,
            mode: TrainMode::Maupg,
            scenario: ScenarioId::Street,
            mean_agent_reward: -1.25,
            episode_crt: 0.1 + 0.2,
            noise_sigma: 0.3,
            critic_loss: None,
        };
        let mut w = CurveWriter::new(Vec::new()).unwrap();
        w.write(&CurveRow::from(&rec)).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert!(text.starts_with("episode,mode,scenario,mean_agent_reward,episode_crt,noise_sigma\n"));
        let rows = read_curve(&text).unwrap();
        assert_eq!(rows, vec![CurveRow::from(&rec)]);
        assert_eq!(rows[0].episode_crt, 0.1 + 0.2);
    }

    #[test]
    fn curve_rejects_wrong_header() {
        assert!(read_curve("episode,scenario\n1,street\n").is_err());
        assert!(read_curve("").is_err());
    }

    #[test]
    fn manifest_carries_hash() {
        let cfg = RunConfig::default();
        let m = RunManifest::new("train", &cfg).with("episodes", 10).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["config_hash"], cfg.content_hash());
        assert_eq!(v["details"]["episodes"], 10);
    }

    #[test]
    fn versioned_reader_rejects_other_schemas() {
        let m = RunManifest::new("eval", &RunConfig::default());
        let text = write_json(&m).unwrap();
        assert_eq!(read_json::<RunManifest>(&text).unwrap(), m);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["schema_version"] = 2.into();
        let err = read_json::<RunManifest>(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Version { found: 2, expected: 1, .. }));
        v.as_object_mut().unwrap().remove("schema_version");
        assert!(matches!(read_json::<RunManifest>(&v.to_string()), Err(Error::Format(_))));
    }
}
