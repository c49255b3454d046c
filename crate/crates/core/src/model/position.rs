use serde::{Deserialize, Serialize};

use crate::record::Record;

/// One agent of a team: its name, what it is responsible for, and the ordered
/// instructions it follows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(alias = "Name")]
    pub name: String,
    #[serde(alias = "Responsibility")]
    pub responsibility: String,
    #[serde(alias = "Policy")]
    pub policy: String,
}

impl AgentSpec {
    pub fn new(
        name: impl Into<String>,
        responsibility: impl Into<String>,
        policy: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            responsibility: responsibility.into(),
            policy: policy.into(),
        }
    }
}

/// A workflow step. `inputs` are 1-based indices of earlier steps whose
/// outputs this step consumes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowStep {
    pub index: usize,
    pub role: String,
    pub inputs: Vec<usize>,
    pub output: String,
}

impl WorkflowStep {
    pub fn new(
        index: usize,
        role: impl Into<String>,
        inputs: Vec<usize>,
        output: impl Into<String>,
    ) -> Self {
        Self {
            index,
            role: role.into(),
            inputs,
            output: output.into(),
        }
    }
}

/// A complete agentic system: the agent set and the ordered workflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub agents: Vec<AgentSpec>,
    pub workflow: Vec<WorkflowStep>,
    #[serde(default)]
    pub provenance: String,
}

impl Record for Position {
    const KIND: &'static str = "position";
}

impl Position {
    pub fn new(agents: Vec<AgentSpec>, workflow: Vec<WorkflowStep>) -> Self {
        Self {
            agents,
            workflow,
            provenance: String::new(),
        }
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn agent(&self, name: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn step(&self, index: usize) -> Option<&WorkflowStep> {
        index
            .checked_sub(1)
            .and_then(|i| self.workflow.get(i))
            .filter(|s| s.index == index)
            .or_else(|| self.workflow.iter().find(|s| s.index == index))
    }

    pub fn final_step(&self) -> Option<&WorkflowStep> {
        self.workflow.last()
    }

    /// Equality of agents and workflow, ignoring provenance.
    pub fn same_structure(&self, other: &Position) -> bool {
        self.agents == other.agents && self.workflow == other.workflow
    }

    /// Canonical text of the agent list alone.
    pub fn roles_text(&self) -> String {
        crate::record::canonical_json(&self.agents)
    }

    /// Canonical text of the workflow alone.
    pub fn workflow_text(&self) -> String {
        crate::record::canonical_json(&self.workflow)
    }

    /// Every free-text field of the team, for quote grounding.
    pub fn text_fields(&self) -> impl Iterator<Item = &str> {
        self.agents
            .iter()
            .flat_map(|a| {
                [
                    a.name.as_str(),
                    a.responsibility.as_str(),
                    a.policy.as_str(),
                ]
            })
            .chain(
                self.workflow
                    .iter()
                    .flat_map(|s| [s.role.as_str(), s.output.as_str()]),
            )
    }

    /// True when `quote` appears verbatim in the record or in any text field.
    pub fn contains_quote(&self, quote: &str) -> bool {
        let quote = quote.trim();
        !quote.is_empty()
            && (self.text_fields().any(|t| t.contains(quote)) || self.to_record().contains(quote))
    }
}
