//! A task scored on the team itself: each instance is one hidden structural
//! feature, so fitness is the fraction of features the team has. Needs no
//! model calls to evaluate.

use std::sync::Arc;

use super::{Instance, Scorer, TaskBundle};
use crate::model::Position;

pub struct Feature {
    pub id: &'static str,
    /// Error text when the feature is absent.
    pub missing: &'static str,
    pub check: fn(&Position) -> bool,
}

fn name_contains(pos: &Position, needle: &str) -> bool {
    pos.agents
        .iter()
        .any(|a| a.name.to_lowercase().contains(needle))
}

pub const FEATURES: [Feature; 5] = [
    Feature {
        id: "F1",
        missing: "no role whose name contains 'verifier' checks the result",
        check: |p| name_contains(p, "verifier"),
    },
    Feature {
        id: "F2",
        missing: "no step combines the outputs of two or more earlier steps",
        check: |p| {
            p.workflow.iter().any(|s| {
                let mut inputs = s.inputs.clone();
                inputs.sort_unstable();
                inputs.dedup();
                inputs.len() >= 2
            })
        },
    },
    Feature {
        id: "F3",
        missing: "no role whose name contains 'planner' plans the work",
        check: |p| name_contains(p, "planner"),
    },
    Feature {
        id: "F4",
        missing: "no role policy requires to cite sources",
        check: |p| {
            p.agents
                .iter()
                .any(|a| a.policy.to_lowercase().contains("cite sources"))
        },
    },
    Feature {
        id: "F5",
        missing: "the final step does not produce a final report",
        check: |p| {
            p.workflow
                .last()
                .is_some_and(|s| s.output.to_lowercase().contains("final report"))
        },
    },
];

pub const DESCRIPTION: &str =
    "Write a short, well-sourced research brief answering a factual question. \
The team should plan the work, gather facts, draft the brief, check it and deliver it.";

/// Indices into [`FEATURES`] that `pos` lacks.
pub fn missing_features(pos: &Position) -> Vec<usize> {
    FEATURES
        .iter()
        .enumerate()
        .filter(|(_, f)| !(f.check)(pos))
        .map(|(i, _)| i)
        .collect()
}

pub struct FeatureScorer;

impl Scorer for FeatureScorer {
    fn id(&self) -> &str {
        "structural_features"
    }

    fn needs_execution(&self) -> bool {
        false
    }

    fn score(&self, instance: &Instance, _answer: &str, pos: &Position) -> (f64, Option<String>) {
        let id = instance
            .reference
            .get("feature")
            .and_then(|v| v.as_str())
            .unwrap_or("");
        match FEATURES.iter().find(|f| f.id == id) {
            Some(f) if (f.check)(pos) => (1.0, None),
            Some(f) => (
                0.0,
                Some(format!("missing feature {}: {}", f.id, f.missing)),
            ),
            None => (
                0.0,
                Some(format!("instance `{}` names no known feature", instance.id)),
            ),
        }
    }
}

pub fn instances() -> Vec<Instance> {
    FEATURES
        .iter()
        .map(|f| Instance {
            id: f.id.to_lowercase(),
            text: DESCRIPTION.to_string(),
            reference: serde_json::json!({ "feature": f.id }),
        })
        .collect()
}

pub fn bundle() -> TaskBundle {
    TaskBundle {
        id: "synthetic-flaws".into(),
        description: DESCRIPTION.into(),
        train: instances(),
        eval: instances(),
        scorer: Arc::new(FeatureScorer),
    }
}
