use serde::{Deserialize, Serialize};
use std::io;
use std::path::{Path, PathBuf};

use super::state::{read_checkpoint, write_checkpoint, SwarmState, TrajectoryPoint};
use super::{ParticleStep, SwarmError, TraceEvent};
use crate::gateway::UsageLedger;
use crate::model::{Position, SwarmConfig};
use crate::record::{canonical_json, from_record, Record};
use crate::runtime::Transcript;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub task: String,
    pub provider: String,
    pub optimizer_model: String,
    pub executor_model: String,
    pub started: String,
    pub finished: Option<String>,
    pub status: RunStatus,
    pub iterations_run: usize,
    pub global_best_fitness: Option<f64>,
    pub stopped_early: bool,
    pub message: Option<String>,
}

impl Record for RunManifest {
    const KIND: &'static str = "run_manifest";
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Record for Trajectory {
    const KIND: &'static str = "trajectory";
}

/// Files of one run:
/// `config.json`, `manifest.json`, `iterations/t<t>/p<i>.json`,
/// `transcripts/t<t>/p<i>/<instance>.json`, `ckpt_<t>.json`,
/// `global_best.json`, `usage.json`, `trajectory.json`, `trace.jsonl`, `cache/`.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

fn write(path: &Path, text: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("{} is not a run directory", root.display())));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn global_best_path(&self) -> PathBuf {
        self.root.join("global_best.json")
    }

    pub fn trajectory_path(&self) -> PathBuf {
        self.root.join("trajectory.json")
    }

    pub fn usage_path(&self) -> PathBuf {
        self.root.join("usage.json")
    }

    pub fn trace_path(&self) -> PathBuf {
        self.root.join("trace.jsonl")
    }

    pub fn checkpoint_path(&self, iteration: usize) -> PathBuf {
        self.root.join(format!("ckpt_{iteration}.json"))
    }

    pub fn step_path(&self, iteration: usize, particle: usize) -> PathBuf {
        self.root.join("iterations").join(format!("t{iteration}")).join(format!("p{particle}.json"))
    }

    /// Highest-numbered checkpoint, if any.
    pub fn latest_checkpoint(&self) -> Option<(usize, PathBuf)> {
        std::fs::read_dir(&self.root)
            .ok()?
            .filter_map(|e| {
                let name = e.ok()?.file_name().into_string().ok()?;
                let t = name.strip_prefix("ckpt_")?.strip_suffix(".json")?.parse().ok()?;
                Some((t, self.checkpoint_path(t)))
            })
            .max_by_key(|(t, _)| *t)
    }

    pub fn write_record<T: Record>(&self, path: &Path, value: &T) -> io::Result<()> {
        write(path, &value.to_record())
    }

    pub fn read_record<T: Record>(&self, path: &Path) -> Result<T, SwarmError> {
        let text = std::fs::read_to_string(path).map_err(|e| SwarmError::Io(format!("{}: {e}", path.display())))?;
        from_record(&text).map_err(|e| SwarmError::Io(format!("{}: {e}", path.display())))
    }

    pub fn write_config(&self, config: &SwarmConfig) -> io::Result<()> {
        self.write_record(&self.config_path(), config)
    }

    pub fn read_config(&self) -> Result<SwarmConfig, SwarmError> {
        self.read_record(&self.config_path())
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> io::Result<()> {
        self.write_record(&self.manifest_path(), manifest)
    }

    pub fn read_manifest(&self) -> Result<RunManifest, SwarmError> {
        self.read_record(&self.manifest_path())
    }

    pub fn write_step(&self, step: &ParticleStep) -> io::Result<()> {
        self.write_record(&self.step_path(step.iteration, step.particle), step)
    }

    pub fn write_transcripts(&self, iteration: usize, particle: usize, transcripts: &[Transcript]) -> io::Result<()> {
        for t in transcripts {
            let name: String = t
                .instance
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                .collect();
            let path = self
                .root
                .join("transcripts")
                .join(format!("t{iteration}"))
                .join(format!("p{particle}"))
                .join(format!("{name}.json"));
            write(&path, &t.to_record())?;
        }
        Ok(())
    }

    pub fn write_checkpoint(&self, state: &SwarmState) -> io::Result<PathBuf> {
        let path = self.checkpoint_path(state.iteration);
        write_checkpoint(&path, state)?;
        Ok(path)
    }

    pub fn read_checkpoint(&self, iteration: usize) -> Result<SwarmState, SwarmError> {
        read_checkpoint(&self.checkpoint_path(iteration))
    }

    pub fn write_global_best(&self, best: &Position) -> io::Result<()> {
        self.write_record(&self.global_best_path(), best)
    }

    pub fn read_global_best(&self) -> Result<Position, SwarmError> {
        self.read_record(&self.global_best_path())
    }

    pub fn write_trajectory(&self, trajectory: &Trajectory) -> io::Result<()> {
        self.write_record(&self.trajectory_path(), trajectory)
    }

    pub fn read_trajectory(&self) -> Result<Trajectory, SwarmError> {
        self.read_record(&self.trajectory_path())
    }

    pub fn write_usage(&self, ledger: &UsageLedger) -> io::Result<()> {
        self.write_record(&self.usage_path(), ledger)
    }

    pub fn read_usage(&self) -> Result<UsageLedger, SwarmError> {
        self.read_record(&self.usage_path())
    }

    pub fn append_trace(&self, events: &[TraceEvent]) -> io::Result<()> {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(self.trace_path())?;
        for e in events {
            writeln!(f, "{}", serde_json::to_string(e).expect("trace event"))?;
        }
        Ok(())
    }
}

/// Canonical text used to compare two artifacts byte for byte.
pub fn canonical<T: Serialize>(value: &T) -> String {
    canonical_json(value)
}
