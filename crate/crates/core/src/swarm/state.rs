use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use super::SwarmError;
use crate::gateway::UsageTotals;
use crate::model::{Best, Particle};
use crate::record::{canonical_json, Record, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalBest {
    pub best: Best,
    pub particle: usize,
}

/// Global best after one barrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub global_best: f64,
    pub particle: usize,
    pub improved: bool,
    /// Summaries of the velocity that produced a new global best.
    pub cause: Vec<String>,
    pub personal_bests: Vec<f64>,
    pub fitness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    /// Completed main-loop iterations; 0 right after initialization.
    pub iteration: usize,
    pub particles: Vec<Particle>,
    pub global_best: Option<GlobalBest>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub master_seed: u64,
    pub usage: UsageTotals,
}

impl Record for SwarmState {
    const KIND: &'static str = "swarm_state";
}

impl SwarmState {
    pub fn global_fitness(&self) -> Option<f64> {
        self.global_best.as_ref().map(|g| g.best.fitness)
    }

    /// Consistency problems: global best not the maximum personal best.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let max = self
            .particles
            .iter()
            .map(|p| p.personal_best.fitness)
            .fold(f64::NEG_INFINITY, f64::max);
        match &self.global_best {
            Some(g) if !self.particles.is_empty() && g.best.fitness != max => out.push(format!(
                "global best {} differs from the best personal best {max}",
                g.best.fitness
            )),
            None if !self.particles.is_empty() => out.push("global best undefined after initialization".into()),
            _ => {}
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    kind: String,
    sha256: String,
    state: serde_json::Value,
}

fn digest(state: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(canonical_json(state).as_bytes()))
}

/// Checkpoint text: the state plus a digest of its canonical form.
pub fn checkpoint_text(state: &SwarmState) -> String {
    let value = serde_json::to_value(state).expect("state serializes");
    let ckpt = Checkpoint {
        schema_version: SCHEMA_VERSION,
        kind: "checkpoint".into(),
        sha256: digest(&value),
        state: value,
    };
    let mut text = canonical_json(&ckpt);
    text.push('\n');
    text
}

pub fn parse_checkpoint(text: &str) -> Result<SwarmState, SwarmError> {
    let corrupt = |m: String| SwarmError::CorruptCheckpoint(m);
    let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    if ckpt.schema_version != SCHEMA_VERSION {
        return Err(corrupt(format!(
            "schema_version {} (expected {SCHEMA_VERSION})",
            ckpt.schema_version
        )));
    }
    if ckpt.kind != "checkpoint" {
        return Err(corrupt(format!("kind `{}` (expected `checkpoint`)", ckpt.kind)));
    }
    if digest(&ckpt.state) != ckpt.sha256 {
        return Err(corrupt("digest mismatch".into()));
    }
    serde_json::from_value(ckpt.state).map_err(|e| corrupt(e.to_string()))
}

pub fn write_checkpoint(path: &Path, state: &SwarmState) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, checkpoint_text(state))?;
    std::fs::rename(tmp, path)
}

pub fn read_checkpoint(path: &Path) -> Result<SwarmState, SwarmError> {
    let text = std::fs::read_to_string(path).map_err(|e| SwarmError::Io(format!("{}: {e}", path.display())))?;
    parse_checkpoint(&text)
}
