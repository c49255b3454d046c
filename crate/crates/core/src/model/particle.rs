use serde::{Deserialize, Serialize};

use super::{FlawReport, Position, Velocity};

/// A position together with the fitness it scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub position: Position,
    pub fitness: f64,
}

/// One candidate system and its search state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: usize,
    pub position: Position,
    pub velocity: Option<Velocity>,
    pub personal_best: Best,
    /// Fitness of each evaluated position, indexed by iteration.
    pub fitness_history: Vec<f64>,
    /// Flaw report of each evaluated position, indexed by iteration.
    pub flaw_history: Vec<FlawReport>,
    /// Velocity applied after each iteration, indexed by iteration.
    pub velocity_history: Vec<Velocity>,
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Particle {
    /// Replaces the personal best iff `fitness` is strictly greater.
    /// Returns whether a replacement happened.
    pub fn update_personal_best(&mut self, fitness: f64, position: &Position) -> bool {
        if fitness > self.personal_best.fitness {
            self.personal_best = Best {
                position: position.clone(),
                fitness,
            };
            true
        } else {
            false
        }
    }

    /// The most recent flaw report, `f^(t)`.
    pub fn last_flaws(&self) -> Option<&FlawReport> {
        self.flaw_history.last()
    }
}
