use serde::{Deserialize, Serialize};

use crate::record::Record;

/// Fitness is normalized to [0, 1]; this is the maximum.
pub const MAX_FITNESS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceError {
    pub instance: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance: String,
    pub score: f64,
}

/// Result of scoring a position on a split: mean fitness plus the error set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub fitness: f64,
    pub errors: Vec<InstanceError>,
    pub per_instance: Vec<InstanceScore>,
}

impl Record for EvalOutcome {
    const KIND: &'static str = "eval_outcome";
}

impl EvalOutcome {
    /// Builds an outcome from per-instance results in the given order.
    /// Fitness is the arithmetic mean of the scores (0 for no instances).
    pub fn from_scores(results: Vec<(String, f64, Option<String>)>) -> Self {
        let n = results.len();
        let mut errors = Vec::new();
        let mut per_instance = Vec::with_capacity(n);
        let mut total = 0.0;
        for (instance, score, error) in results {
            let score = if score.is_finite() {
                score.clamp(0.0, 1.0)
            } else {
                0.0
            };
            total += score;
            if let Some(error) = error {
                errors.push(InstanceError {
                    instance: instance.clone(),
                    error,
                });
            }
            per_instance.push(InstanceScore { instance, score });
        }
        let fitness = if n == 0 { 0.0 } else { total / n as f64 };
        Self {
            fitness,
            errors,
            per_instance,
        }
    }

    pub fn perfect() -> Self {
        Self {
            fitness: MAX_FITNESS,
            errors: Vec::new(),
            per_instance: Vec::new(),
        }
    }

    pub fn is_max(&self) -> bool {
        self.fitness >= MAX_FITNESS
    }

    /// Invariant problems: non-finite fitness, or an error set inconsistent
    /// with maximal fitness.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.fitness.is_finite() {
            out.push("fitness is not finite".to_string());
        }
        if self.errors.is_empty() != self.is_max() {
            out.push(format!(
                "error set has {} entries but fitness is {}",
                self.errors.len(),
                self.fitness
            ));
        }
        out
    }

    /// The error set as text, one `[instance] error` line each.
    pub fn error_lines(&self) -> String {
        self.errors
            .iter()
            .map(|e| format!("[{}] {}", e.instance, e.error))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
