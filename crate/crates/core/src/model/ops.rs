use serde::{Deserialize, Serialize};
use std::fmt;

use super::{AgentSpec, WorkflowStep};
use crate::record::compact_json;

/// A single structural edit of a position.
///
/// Step numbers in every operation refer to the workflow the operation is
/// applied to. `AddStep` inserts its step before the existing step numbered
/// `step.index` (so `index = n + 1` appends); its inputs name existing steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum AdjustmentOp {
    #[serde(alias = "Add Role", alias = "add_role")]
    AddRole { role: AgentSpec },
    #[serde(alias = "Modify Role", alias = "modify_role")]
    ModifyRole { name: String, policy: String },
    #[serde(alias = "Delete Role", alias = "delete_role")]
    DeleteRole { name: String },
    #[serde(alias = "Add Step", alias = "add_step")]
    AddStep { step: WorkflowStep },
    #[serde(alias = "Modify Input", alias = "modify_input")]
    ModifyInput { step: usize, inputs: Vec<usize> },
    #[serde(alias = "Modify Output", alias = "modify_output")]
    ModifyOutput { step: usize, output: String },
    #[serde(alias = "Delete Step", alias = "delete_step")]
    DeleteStep { step: usize },
    #[serde(
        alias = "Re-order Steps",
        alias = "Reorder Steps",
        alias = "reorder_steps"
    )]
    ReorderSteps { order: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    AddRole,
    ModifyRole,
    DeleteRole,
    AddStep,
    ModifyInput,
    ModifyOutput,
    DeleteStep,
    ReorderSteps,
}

impl OpKind {
    pub fn is_role_op(self) -> bool {
        matches!(
            self,
            OpKind::AddRole | OpKind::ModifyRole | OpKind::DeleteRole
        )
    }
}

impl AdjustmentOp {
    pub fn kind(&self) -> OpKind {
        match self {
            AdjustmentOp::AddRole { .. } => OpKind::AddRole,
            AdjustmentOp::ModifyRole { .. } => OpKind::ModifyRole,
            AdjustmentOp::DeleteRole { .. } => OpKind::DeleteRole,
            AdjustmentOp::AddStep { .. } => OpKind::AddStep,
            AdjustmentOp::ModifyInput { .. } => OpKind::ModifyInput,
            AdjustmentOp::ModifyOutput { .. } => OpKind::ModifyOutput,
            AdjustmentOp::DeleteStep { .. } => OpKind::DeleteStep,
            AdjustmentOp::ReorderSteps { .. } => OpKind::ReorderSteps,
        }
    }

    /// Single-line canonical text; the unit of literal repetition checks.
    pub fn canonical(&self) -> String {
        compact_json(self)
    }

    /// Problems with the payload that do not depend on any position.
    pub fn shape_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut nonempty = |field: &str, value: &str| {
            if value.trim().is_empty() {
                problems.push(format!("{:?}: `{field}` must not be empty", self.kind()));
            }
        };
        match self {
            AdjustmentOp::AddRole { role } => {
                nonempty("role.name", &role.name);
                nonempty("role.responsibility", &role.responsibility);
                nonempty("role.policy", &role.policy);
            }
            AdjustmentOp::ModifyRole { name, policy } => {
                nonempty("name", name);
                nonempty("policy", policy);
            }
            AdjustmentOp::DeleteRole { name } => nonempty("name", name),
            AdjustmentOp::AddStep { step } => {
                nonempty("step.role", &step.role);
                nonempty("step.output", &step.output);
            }
            AdjustmentOp::ModifyOutput { output, .. } => nonempty("output", output),
            AdjustmentOp::ModifyInput { .. }
            | AdjustmentOp::DeleteStep { .. }
            | AdjustmentOp::ReorderSteps { .. } => {}
        }
        problems
    }

    /// Short human summary, used in reports.
    pub fn summary(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AdjustmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdjustmentOp::AddRole { role } => write!(f, "Add Role: {}", role.name),
            AdjustmentOp::ModifyRole { name, .. } => write!(f, "Modify Role: {name}"),
            AdjustmentOp::DeleteRole { name } => write!(f, "Delete Role: {name}"),
            AdjustmentOp::AddStep { step } => write!(f, "Add Step {}: {}", step.index, step.role),
            AdjustmentOp::ModifyInput { step, inputs } => {
                write!(f, "Modify Input: step {step} <- {inputs:?}")
            }
            AdjustmentOp::ModifyOutput { step, .. } => write!(f, "Modify Output: step {step}"),
            AdjustmentOp::DeleteStep { step } => write!(f, "Delete Step: {step}"),
            AdjustmentOp::ReorderSteps { order } => write!(f, "Re-order Steps: {order:?}"),
        }
    }
}
