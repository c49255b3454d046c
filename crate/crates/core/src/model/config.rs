use serde::{Deserialize, Serialize};

use crate::record::Record;

/// Inclusion probability and sampling temperature of one velocity term.
///
/// The term is computed when a Bernoulli draw with probability `inclusion`
/// succeeds; `inclusion = 0` disables it for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermControl {
    pub inclusion: f64,
    /// Overrides the particle temperature for this term's calls.
    pub temperature: Option<f64>,
}

impl Default for TermControl {
    fn default() -> Self {
        Self {
            inclusion: 1.0,
            temperature: None,
        }
    }
}

impl TermControl {
    pub fn disabled() -> Self {
        Self {
            inclusion: 0.0,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermControls {
    pub failure: TermControl,
    pub personal: TermControl,
    pub global: TermControl,
}

/// How a velocity is turned into the next position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionUpdateMode {
    /// Ask the optimizer model to rewrite the team, check it against the
    /// deterministic application, fall back on disagreement.
    #[default]
    Llm,
    /// Apply the operations directly.
    Deterministic,
}

/// How a position's workflow becomes an execution plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    #[default]
    Deterministic,
    LlmAssisted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    /// Explicit per-particle temperatures. When empty, `n_particles`
    /// temperatures are spread evenly over `[temperature_low, temperature_high]`.
    pub temperatures: Vec<f64>,
    pub temperature_low: f64,
    pub temperature_high: f64,
    pub term_controls: TermControls,
    pub optimizer_model: String,
    pub executor_model: String,
    pub master_seed: u64,
    /// Ablation switches: when false, operations of that family are removed
    /// from every velocity before it is applied.
    pub role_ops: bool,
    pub workflow_ops: bool,
    pub position_update: PositionUpdateMode,
    pub plan_mode: PlanMode,
    /// Stop once the global best reaches maximal fitness.
    pub early_stop: bool,
    /// Concurrent particle pipelines; `None` means one per particle.
    pub workers: Option<usize>,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 5,
            n_iterations: 10,
            temperatures: Vec::new(),
            temperature_low: 0.2,
            temperature_high: 1.6,
            term_controls: TermControls::default(),
            optimizer_model: "gpt-4o-mini".into(),
            executor_model: "gpt-3.5-turbo".into(),
            master_seed: 0,
            role_ops: true,
            workflow_ops: true,
            position_update: PositionUpdateMode::Llm,
            plan_mode: PlanMode::Deterministic,
            early_stop: false,
            workers: None,
        }
    }
}

impl Record for SwarmConfig {
    const KIND: &'static str = "swarm_config";
}

impl SwarmConfig {
    /// Evenly spaced temperatures from low to high; a single particle gets the
    /// midpoint.
    pub fn stratified_temperatures(n: usize, low: f64, high: f64) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![(low + high) / 2.0],
            _ => (0..n)
                .map(|i| {
                    let t = low + (high - low) * i as f64 / (n - 1) as f64;
                    (t * 1e9).round() / 1e9
                })
                .collect(),
        }
    }

    pub fn resolved_temperatures(&self) -> Vec<f64> {
        if self.temperatures.is_empty() {
            Self::stratified_temperatures(
                self.n_particles,
                self.temperature_low,
                self.temperature_high,
            )
        } else {
            self.temperatures.clone()
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(self.n_particles).max(1)
    }

    /// Every violated constraint, as a human-readable message.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_particles < 1 {
            out.push("n_particles ≥ 1".to_string());
        }
        if self.n_iterations < 1 {
            out.push("n_iterations ≥ 1".to_string());
        }
        if !self.temperatures.is_empty() && self.temperatures.len() != self.n_particles {
            out.push(format!(
                "temperatures has {} entries but n_particles is {}",
                self.temperatures.len(),
                self.n_particles
            ));
        }
        let temps_ok = self
            .resolved_temperatures()
            .iter()
            .chain([self.temperature_low, self.temperature_high].iter())
            .all(|t| t.is_finite() && *t >= 0.0);
        if !temps_ok {
            out.push("temperatures must be finite and ≥ 0".to_string());
        }
        if self.temperature_low > self.temperature_high {
            out.push("temperature_low must not exceed temperature_high".to_string());
        }
        for (name, c) in [
            ("failure", self.term_controls.failure),
            ("personal", self.term_controls.personal),
            ("global", self.term_controls.global),
        ] {
            if !(0.0..=1.0).contains(&c.inclusion) {
                out.push(format!("{name} inclusion probability must be in [0, 1]"));
            }
            if let Some(t) = c.temperature {
                if !t.is_finite() || t < 0.0 {
                    out.push(format!("{name} temperature must be finite and ≥ 0"));
                }
            }
        }
        if self.optimizer_model.trim().is_empty() || self.executor_model.trim().is_empty() {
            out.push("model ids must not be empty".to_string());
        }
        out
    }
}
