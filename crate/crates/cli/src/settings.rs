//! Run settings: command-line flags over a TOML file over built-in defaults.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use textswarm::gateway::{
    Gateway, HttpProvider, HttpProviderConfig, OfflineProvider, Provider, ResponseCache, Script,
    ScriptedProvider,
};
use textswarm::model::SwarmConfig;
use textswarm::tasks::{self, manifest, TaskBundle};
use textswarm::Record;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Live,
    Scripted,
    Cached,
}

/// Layout of the `--config` file. The `[swarm]` table takes every
/// search parameter; the top-level keys mirror the run flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<String>,
    pub provider: Option<ProviderKind>,
    pub script: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub provider_name: Option<String>,
    pub base_url: Option<String>,
    #[serde(default)]
    pub swarm: SwarmConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.script, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(task) = &mut cfg.task {
            if task.ends_with(".toml") && Path::new(task).is_relative() {
                *task = base.join(&*task).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }
}

/// Everything needed to rebuild the provider and task of a run; saved in the
/// run directory so `resume` needs no flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub task: String,
    pub provider: ProviderKind,
    pub script: Option<PathBuf>,
    pub provider_name: Option<String>,
    pub base_url: Option<String>,
}

impl Record for RunSettings {
    const KIND: &'static str = "run_settings";
}

pub const SETTINGS_FILE: &str = "cli_settings.json";

/// A builtin task id, or the path of a task manifest.
pub fn load_task(task: &str) -> Result<TaskBundle, Failure> {
    if let Some(b) = tasks::builtin(task) {
        return Ok(b);
    }
    let path = Path::new(task);
    if path.extension().is_some_and(|e| e == "toml") {
        return manifest::load_manifest(path, &manifest::ScorerRegistry::builtin())
            .map_err(|e| Failure::config(format!("task manifest {task}: {e}")));
    }
    Err(Failure::config(format!(
        "unknown task `{task}` (builtin: {})",
        tasks::BUILTIN_TASKS.join(", ")
    )))
}

/// `fixtures/s1` finds `fixtures/s1.json` too.
pub fn resolve_script(path: &Path) -> Result<PathBuf, Failure> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let with_ext = path.with_extension("json");
    if with_ext.is_file() {
        return Ok(with_ext);
    }
    Err(Failure::config(format!("script {} not found", path.display())))
}

pub fn build_gateway(settings: &RunSettings, cache_dir: Option<&Path>) -> Result<Arc<Gateway>, Failure> {
    let provider: Arc<dyn Provider> = match settings.provider {
        ProviderKind::Scripted => {
            let path = settings
                .script
                .as_deref()
                .ok_or_else(|| Failure::config("--provider scripted needs --script"))?;
            let path = resolve_script(path)?;
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            let script = Script::from_record(&text)
                .map_err(|e| Failure::config(format!("script {}: {e}", path.display())))?;
            Arc::new(ScriptedProvider::new(script))
        }
        ProviderKind::Cached => Arc::new(OfflineProvider),
        ProviderKind::Live => {
            let mut cfg = HttpProviderConfig::default();
            if let Some(name) = &settings.provider_name {
                cfg.name = name.clone();
            }
            if let Some(url) = &settings.base_url {
                cfg.base_url = url.clone();
            }
            Arc::new(HttpProvider::from_env(cfg).map_err(|e| Failure::config(e.to_string()))?)
        }
    };
    let mut gateway = Gateway::new(provider);
    if settings.provider != ProviderKind::Scripted {
        if let Some(dir) = cache_dir {
            let cache = ResponseCache::on_disk(dir)
                .map_err(|e| Failure::other(format!("cache {}: {e}", dir.display())))?;
            gateway = gateway.with_cache(cache);
        } else if settings.provider == ProviderKind::Cached {
            return Err(Failure::config("--provider cached needs a cache directory"));
        }
    }
    Ok(Arc::new(gateway))
}

/// Search-parameter flags; each one overrides the file value.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct SwarmFlags {
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub optimizer_model: Option<String>,
    #[arg(long)]
    pub executor_model: Option<String>,
    /// Concurrent particle pipelines.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Stop once the global best reaches fitness 1.
    #[arg(long)]
    pub early_stop: bool,
}

impl SwarmFlags {
    pub fn apply(&self, c: &mut SwarmConfig) {
        if let Some(v) = self.particles {
            c.n_particles = v;
        }
        if let Some(v) = self.iterations {
            c.n_iterations = v;
        }
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = &self.optimizer_model {
            c.optimizer_model = v.clone();
        }
        if let Some(v) = &self.executor_model {
            c.executor_model = v.clone();
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        if self.early_stop {
            c.early_stop = true;
        }
    }
}
