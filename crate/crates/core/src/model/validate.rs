use std::collections::HashSet;
use std::fmt;

use super::Position;

/// A broken structural rule of a position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoAgents,
    NoSteps,
    EmptyAgentName { position: usize },
    EmptyResponsibility { agent: String },
    EmptyPolicy { agent: String },
    DuplicateAgent { agent: String },
    StepNumbering { position: usize, found: usize },
    UnknownStepRole { step: usize, role: String },
    ForwardOnly { step: usize, input: usize },
    EmptyOutput { step: usize },
}

impl Violation {
    /// Name of the invariant this violation breaks.
    pub fn invariant(&self) -> &'static str {
        match self {
            Violation::NoAgents => "m ≥ 1",
            Violation::NoSteps => "n ≥ 1",
            Violation::EmptyAgentName { .. } => "identifier is non-empty",
            Violation::EmptyResponsibility { .. } | Violation::EmptyPolicy { .. } => {
                "responsibility and policy are non-empty"
            }
            Violation::DuplicateAgent { .. } => "identifier is unique",
            Violation::StepNumbering { .. } => "steps numbered 1..n in order",
            Violation::UnknownStepRole { .. } => "step role names exactly one agent",
            Violation::ForwardOnly { .. } => "forward-only dataflow",
            Violation::EmptyOutput { .. } => "output_spec is non-empty",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.invariant())?;
        match self {
            Violation::NoAgents => write!(f, "the team has no agents"),
            Violation::NoSteps => write!(f, "the workflow has no steps"),
            Violation::EmptyAgentName { position } => {
                write!(f, "agent #{position} has an empty name")
            }
            Violation::EmptyResponsibility { agent } => {
                write!(f, "agent `{agent}` has an empty responsibility")
            }
            Violation::EmptyPolicy { agent } => write!(f, "agent `{agent}` has an empty policy"),
            Violation::DuplicateAgent { agent } => {
                write!(f, "agent `{agent}` is defined more than once")
            }
            Violation::StepNumbering { position, found } => {
                write!(f, "step at position {position} is numbered {found}")
            }
            Violation::UnknownStepRole { step, role } => {
                write!(
                    f,
                    "step {step} is assigned to `{role}`, which is not an agent of the team"
                )
            }
            Violation::ForwardOnly { step, input } => {
                write!(
                    f,
                    "step {step} takes input from step {input}, which does not precede it"
                )
            }
            Violation::EmptyOutput { step } => write!(f, "step {step} has an empty output"),
        }
    }
}

/// Not an error: a signal for the flaw taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    UnreferencedAgent { agent: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnreferencedAgent { agent } => {
                write!(f, "agent `{agent}` is not assigned to any step")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

pub fn validate_position(pos: &Position) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;

    if pos.agents.is_empty() {
        v.push(Violation::NoAgents);
    }
    if pos.workflow.is_empty() {
        v.push(Violation::NoSteps);
    }

    let mut seen = HashSet::new();
    for (i, agent) in pos.agents.iter().enumerate() {
        if agent.name.trim().is_empty() {
            v.push(Violation::EmptyAgentName { position: i + 1 });
            continue;
        }
        if !seen.insert(agent.name.as_str()) {
            v.push(Violation::DuplicateAgent {
                agent: agent.name.clone(),
            });
        }
        if agent.responsibility.trim().is_empty() {
            v.push(Violation::EmptyResponsibility {
                agent: agent.name.clone(),
            });
        }
        if agent.policy.trim().is_empty() {
            v.push(Violation::EmptyPolicy {
                agent: agent.name.clone(),
            });
        }
    }

    let mut referenced = HashSet::new();
    for (i, step) in pos.workflow.iter().enumerate() {
        if step.index != i + 1 {
            v.push(Violation::StepNumbering {
                position: i + 1,
                found: step.index,
            });
        }
        if seen.contains(step.role.as_str()) {
            referenced.insert(step.role.as_str());
        } else {
            v.push(Violation::UnknownStepRole {
                step: step.index,
                role: step.role.clone(),
            });
        }
        for &input in &step.inputs {
            if input == 0 || input >= step.index {
                v.push(Violation::ForwardOnly {
                    step: step.index,
                    input,
                });
            }
        }
        if step.output.trim().is_empty() {
            v.push(Violation::EmptyOutput { step: step.index });
        }
    }

    for agent in &pos.agents {
        if !agent.name.trim().is_empty() && !referenced.contains(agent.name.as_str()) {
            report.warnings.push(Warning::UnreferencedAgent {
                agent: agent.name.clone(),
            });
        }
    }
    report
}
