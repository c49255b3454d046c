use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{EvalOutcome, Position};
use crate::record::Record;

/// The seven diagnosis categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlawCategory {
    MissingRole,
    RedundantRole,
    RolePolicyDeficiency,
    MissingWorkflowStep,
    RedundantWorkflowStep,
    InsufficientInput,
    InappropriateOutput,
}

impl FlawCategory {
    pub const ALL: [FlawCategory; 7] = [
        FlawCategory::MissingRole,
        FlawCategory::RedundantRole,
        FlawCategory::RolePolicyDeficiency,
        FlawCategory::MissingWorkflowStep,
        FlawCategory::RedundantWorkflowStep,
        FlawCategory::InsufficientInput,
        FlawCategory::InappropriateOutput,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FlawCategory::MissingRole => "Missing Role",
            FlawCategory::RedundantRole => "Redundant Role",
            FlawCategory::RolePolicyDeficiency => "Role Policy Deficiency",
            FlawCategory::MissingWorkflowStep => "Missing Workflow Step",
            FlawCategory::RedundantWorkflowStep => "Redundant Workflow Step",
            FlawCategory::InsufficientInput => "Insufficient Input",
            FlawCategory::InappropriateOutput => "Inappropriate Output",
        }
    }

    pub fn is_role_category(self) -> bool {
        matches!(
            self,
            FlawCategory::MissingRole
                | FlawCategory::RedundantRole
                | FlawCategory::RolePolicyDeficiency
        )
    }
}

impl fmt::Display for FlawCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCategory(pub String);

impl FromStr for FlawCategory {
    type Err = UnknownCategory;

    /// Accepts the display label or the identifier, ignoring case, spacing and
    /// punctuation ("Role Policy Deficiency", "role_policy_deficiency").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        FlawCategory::ALL
            .into_iter()
            .find(|c| {
                let label: String = c
                    .label()
                    .chars()
                    .filter(|ch| ch.is_ascii_alphabetic())
                    .map(|ch| ch.to_ascii_lowercase())
                    .collect();
                label == key
            })
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

/// What a flaw points at. Role categories name a role, step categories a step,
/// and a missing step the pair of adjacent steps it belongs between (0 and
/// n + 1 stand for the start and end of the workflow).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlawTarget {
    Role(String),
    Step { index: usize, role: Option<String> },
    Gap(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flaw {
    pub category: FlawCategory,
    pub target: FlawTarget,
    pub explanation: String,
}

impl Flaw {
    pub fn role(
        category: FlawCategory,
        role: impl Into<String>,
        explanation: impl Into<String>,
    ) -> Self {
        Self {
            category,
            target: FlawTarget::Role(role.into()),
            explanation: explanation.into(),
        }
    }

    pub fn step(
        category: FlawCategory,
        index: usize,
        role: Option<String>,
        explanation: impl Into<String>,
    ) -> Self {
        Self {
            category,
            target: FlawTarget::Step { index, role },
            explanation: explanation.into(),
        }
    }

    pub fn gap(before: usize, explanation: impl Into<String>) -> Self {
        Self {
            category: FlawCategory::MissingWorkflowStep,
            target: FlawTarget::Gap(before, before + 1),
            explanation: explanation.into(),
        }
    }

    /// Category-to-target arity rule.
    pub fn arity_ok(&self) -> bool {
        match (&self.target, self.category) {
            (FlawTarget::Role(name), c) => c.is_role_category() && !name.trim().is_empty(),
            (FlawTarget::Gap(a, b), FlawCategory::MissingWorkflowStep) => *b == a + 1,
            (FlawTarget::Step { index, .. }, c) => {
                *index >= 1
                    && matches!(
                        c,
                        FlawCategory::RedundantWorkflowStep
                            | FlawCategory::InsufficientInput
                            | FlawCategory::InappropriateOutput
                    )
            }
            _ => false,
        }
    }

    /// Describes why the target does not resolve against `pos`, if it does not.
    pub fn unresolved_reason(&self, pos: &Position) -> Option<String> {
        if !self.arity_ok() {
            return Some(format!("{} cannot target {:?}", self.category, self.target));
        }
        let n = pos.workflow.len();
        match (&self.target, self.category) {
            (FlawTarget::Role(_), FlawCategory::MissingRole) => None,
            (FlawTarget::Role(name), _) if pos.agent(name).is_none() => {
                Some(format!("role `{name}` is not part of the team"))
            }
            (FlawTarget::Step { index, .. }, _) if *index > n => {
                Some(format!("step {index} is out of range 1..={n}"))
            }
            (FlawTarget::Gap(a, _), _) if *a > n => {
                Some(format!("gap after step {a} is out of range 0..={n}"))
            }
            _ => None,
        }
    }

    /// True when the two flaws name the same category and target.
    pub fn same_kind(&self, other: &Flaw) -> bool {
        self.category == other.category && self.target == other.target
    }
}

impl fmt::Display for Flaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            FlawTarget::Role(name) => write!(f, "{}: {}", self.category, name)?,
            FlawTarget::Step {
                index,
                role: Some(r),
            } => write!(f, "{}: step {} ({})", self.category, index, r)?,
            FlawTarget::Step { index, role: None } => {
                write!(f, "{}: step {}", self.category, index)?
            }
            FlawTarget::Gap(a, b) => {
                write!(f, "{}: between step {} and step {}", self.category, a, b)?
            }
        }
        if !self.explanation.is_empty() {
            write!(f, " - {}", self.explanation)?;
        }
        Ok(())
    }
}

/// A diagnosis of one evaluated position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlawReport {
    pub flaws: Vec<Flaw>,
    pub source_fitness: EvalOutcome,
}

impl Record for FlawReport {
    const KIND: &'static str = "flaw_report";
}

impl FlawReport {
    pub fn new(flaws: Vec<Flaw>, source_fitness: EvalOutcome) -> Self {
        Self {
            flaws,
            source_fitness,
        }
    }

    pub fn empty(source_fitness: EvalOutcome) -> Self {
        Self::new(Vec::new(), source_fitness)
    }

    pub fn is_empty(&self) -> bool {
        self.flaws.is_empty()
    }

    pub fn len(&self) -> usize {
        self.flaws.len()
    }
}
