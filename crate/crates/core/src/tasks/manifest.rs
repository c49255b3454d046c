use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

use super::{arithmetic, planner, synthetic, Instance, Scorer, TaskBundle};

/// A task bundle on disk. Paths are relative to the manifest file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskManifest {
    pub id: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub description_file: Option<PathBuf>,
    pub scorer: String,
    #[serde(default)]
    pub scorer_params: toml::Table,
    pub instances: PathBuf,
    #[serde(default)]
    pub eval_instances: Option<PathBuf>,
    /// Without `eval_instances`, the first `train_size` instances train and
    /// the rest evaluate.
    #[serde(default)]
    pub train_size: Option<usize>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("no scorer registered as `{0}`")]
    UnknownScorer(String),
}

/// Builds a scorer from its parameters and the manifest directory.
pub type ScorerFactory =
    Arc<dyn Fn(&toml::Table, &Path) -> Result<Arc<dyn Scorer>, String> + Send + Sync>;

#[derive(Clone)]
pub struct ScorerRegistry {
    factories: BTreeMap<String, ScorerFactory>,
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("exact_integer", |_, _| {
            Ok(Arc::new(arithmetic::ExactInteger))
        });
        r.register("structural_features", |_, _| {
            Ok(Arc::new(synthetic::FeatureScorer))
        });
        r.register("constraint_plan", |params, dir| {
            let catalog = match params.get("catalog").and_then(|v| v.as_str()) {
                Some(file) => {
                    let path = dir.join(file);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => planner::Catalog::builtin(),
            };
            Ok(Arc::new(planner::PlanScorer { catalog }))
        });
        r
    }

    pub fn register<F>(&mut self, id: impl Into<String>, factory: F)
    where
        F: Fn(&toml::Table, &Path) -> Result<Arc<dyn Scorer>, String> + Send + Sync + 'static,
    {
        self.factories.insert(id.into(), Arc::new(factory));
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(
        &self,
        id: &str,
        params: &toml::Table,
        dir: &Path,
    ) -> Result<Arc<dyn Scorer>, ManifestError> {
        let factory = self
            .factories
            .get(id)
            .ok_or_else(|| ManifestError::UnknownScorer(id.to_string()))?;
        factory(params, dir).map_err(|message| ManifestError::Invalid {
            path: dir.to_path_buf(),
            message,
        })
    }
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_instances(path: &Path) -> Result<Vec<Instance>, ManifestError> {
    serde_json::from_str(&read(path)?).map_err(|e| ManifestError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_manifest(path: &Path, registry: &ScorerRegistry) -> Result<TaskBundle, ManifestError> {
    let invalid = |message: String| ManifestError::Invalid {
        path: path.to_path_buf(),
        message,
    };
    let manifest: TaskManifest =
        toml::from_str(&read(path)?).map_err(|e| invalid(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let description = match (&manifest.description, &manifest.description_file) {
        (Some(d), None) => d.clone(),
        (None, Some(f)) => read(&dir.join(f))?,
        _ => {
            return Err(invalid(
                "exactly one of description and description_file is required".into(),
            ))
        }
    };
    let mut train = read_instances(&dir.join(&manifest.instances))?;
    let eval = match (&manifest.eval_instances, manifest.train_size) {
        (Some(f), _) => read_instances(&dir.join(f))?,
        (None, Some(n)) if n <= train.len() => train.split_off(n),
        (None, Some(n)) => {
            return Err(invalid(format!(
                "train_size {n} exceeds {} instances",
                train.len()
            )))
        }
        (None, None) => train.clone(),
    };
    let bundle = TaskBundle {
        id: manifest.id.clone(),
        description,
        train,
        eval,
        scorer: registry.build(&manifest.scorer, &manifest.scorer_params, dir)?,
    };
    let problems = bundle.problems();
    if !problems.is_empty() {
        return Err(invalid(problems.join("; ")));
    }
    Ok(bundle)
}
