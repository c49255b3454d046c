//! Deterministic application of adjustment operations.
//!
//! All targets in one call refer to the input position: role names to its
//! agents, step numbers to its workflow. Operations are applied in phases
//! (role deletions, modifications, additions; then step edits, reordering,
//! deletion and insertion, then renumbering), so the result does not depend on
//! the order in which operations of different kinds are listed. Added roles
//! and inserted steps that share a slot keep their listed order.

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use super::validate::{validate_position, Violation};
use super::{AdjustmentOp, AgentSpec, Position, WorkflowStep};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("unknown target: {0}")]
    UnknownTarget(String),
    #[error("illegal modification: {0}")]
    IllegalModification(String),
    #[error("broken dataflow: {0}")]
    BrokenDataflow(String),
    #[error("result is not a valid position: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidResult(Vec<Violation>),
}

enum Slot {
    Original(usize),
    Added(WorkflowStep),
}

pub fn apply_ops(pos: &Position, ops: &[AdjustmentOp]) -> Result<Position, ApplyError> {
    if ops.is_empty() {
        return Ok(pos.clone());
    }
    for op in ops {
        if let Some(problem) = op.shape_problems().into_iter().next() {
            return Err(ApplyError::IllegalModification(problem));
        }
    }

    let agents = apply_role_ops(pos, ops)?;
    let workflow = apply_step_ops(pos, ops)?;

    let result = Position {
        agents,
        workflow,
        provenance: pos.provenance.clone(),
    };
    let report = validate_position(&result);
    if let Some(Violation::ForwardOnly { step, input }) = report
        .violations
        .iter()
        .find(|v| matches!(v, Violation::ForwardOnly { .. }))
    {
        return Err(ApplyError::BrokenDataflow(format!(
            "step {step} would take input from step {input}, which does not precede it"
        )));
    }
    if !report.is_valid() {
        return Err(ApplyError::InvalidResult(report.violations));
    }
    Ok(result)
}

fn apply_role_ops(pos: &Position, ops: &[AdjustmentOp]) -> Result<Vec<AgentSpec>, ApplyError> {
    let exists = |name: &str| pos.agent(name).is_some();
    let mut deleted = BTreeSet::new();
    let mut modified: BTreeMap<&str, &str> = BTreeMap::new();
    let mut added: Vec<&AgentSpec> = Vec::new();

    for op in ops {
        match op {
            AdjustmentOp::DeleteRole { name } => {
                if !exists(name) {
                    return Err(ApplyError::UnknownTarget(format!("role `{name}`")));
                }
                deleted.insert(name.as_str());
            }
            AdjustmentOp::ModifyRole { name, policy } => {
                if !exists(name) {
                    return Err(ApplyError::UnknownTarget(format!("role `{name}`")));
                }
                if let Some(prev) = modified.insert(name.as_str(), policy.as_str()) {
                    if prev != policy {
                        return Err(ApplyError::IllegalModification(format!(
                            "conflicting policy updates for role `{name}`"
                        )));
                    }
                }
            }
            AdjustmentOp::AddRole { role } => {
                if added.iter().any(|r| r.name == role.name) {
                    return Err(ApplyError::IllegalModification(format!(
                        "role `{}` is added more than once",
                        role.name
                    )));
                }
                added.push(role);
            }
            _ => {}
        }
    }

    if let Some(name) = modified.keys().find(|n| deleted.contains(*n)) {
        return Err(ApplyError::IllegalModification(format!(
            "role `{name}` is both modified and deleted"
        )));
    }
    for role in &added {
        if exists(&role.name) && !deleted.contains(role.name.as_str()) {
            return Err(ApplyError::IllegalModification(format!(
                "role `{}` already exists; only its policy may be modified",
                role.name
            )));
        }
    }

    let mut agents: Vec<AgentSpec> = pos
        .agents
        .iter()
        .filter(|a| !deleted.contains(a.name.as_str()))
        .map(|a| match modified.get(a.name.as_str()) {
            Some(policy) => AgentSpec {
                policy: (*policy).to_string(),
                ..a.clone()
            },
            None => a.clone(),
        })
        .collect();
    agents.extend(added.into_iter().cloned());
    Ok(agents)
}

fn apply_step_ops(pos: &Position, ops: &[AdjustmentOp]) -> Result<Vec<WorkflowStep>, ApplyError> {
    let n = pos.workflow.len();
    let in_range = |i: usize| (1..=n).contains(&i);
    let mut deleted = BTreeSet::new();
    let mut new_inputs: BTreeMap<usize, &Vec<usize>> = BTreeMap::new();
    let mut new_outputs: BTreeMap<usize, &str> = BTreeMap::new();
    let mut order: Option<&Vec<usize>> = None;
    let mut inserts: Vec<&WorkflowStep> = Vec::new();

    for op in ops {
        match op {
            AdjustmentOp::DeleteStep { step } => {
                if !in_range(*step) {
                    return Err(ApplyError::UnknownTarget(format!("step {step}")));
                }
                deleted.insert(*step);
            }
            AdjustmentOp::ModifyInput { step, inputs } => {
                if !in_range(*step) {
                    return Err(ApplyError::UnknownTarget(format!("step {step}")));
                }
                if let Some(bad) = inputs.iter().find(|i| !in_range(**i)) {
                    return Err(ApplyError::UnknownTarget(format!(
                        "input step {bad} of step {step}"
                    )));
                }
                if let Some(prev) = new_inputs.insert(*step, inputs) {
                    if prev != inputs {
                        return Err(ApplyError::IllegalModification(format!(
                            "conflicting input updates for step {step}"
                        )));
                    }
                }
            }
            AdjustmentOp::ModifyOutput { step, output } => {
                if !in_range(*step) {
                    return Err(ApplyError::UnknownTarget(format!("step {step}")));
                }
                if let Some(prev) = new_outputs.insert(*step, output.as_str()) {
                    if prev != output {
                        return Err(ApplyError::IllegalModification(format!(
                            "conflicting output updates for step {step}"
                        )));
                    }
                }
            }
            AdjustmentOp::ReorderSteps { order: perm } => {
                let set: BTreeSet<usize> = perm.iter().copied().collect();
                if perm.len() != n || set.len() != n || !set.iter().all(|i| in_range(*i)) {
                    return Err(ApplyError::IllegalModification(format!(
                        "re-order {perm:?} is not a permutation of steps 1..={n}"
                    )));
                }
                if order.is_some_and(|o| o != perm) {
                    return Err(ApplyError::IllegalModification(
                        "conflicting re-orders".into(),
                    ));
                }
                order = Some(perm);
            }
            AdjustmentOp::AddStep { step } => {
                if step.index == 0 || step.index > n + 1 {
                    return Err(ApplyError::UnknownTarget(format!(
                        "insertion point {} (must be within 1..={})",
                        step.index,
                        n + 1
                    )));
                }
                if let Some(bad) = step.inputs.iter().find(|i| !in_range(**i)) {
                    return Err(ApplyError::UnknownTarget(format!(
                        "input step {bad} of the added step"
                    )));
                }
                inserts.push(step);
            }
            _ => {}
        }
    }

    for step in new_inputs.keys().chain(new_outputs.keys()) {
        if deleted.contains(step) {
            return Err(ApplyError::IllegalModification(format!(
                "step {step} is both modified and deleted"
            )));
        }
    }

    let base: Vec<usize> = order.cloned().unwrap_or_else(|| (1..=n).collect());
    let mut slots: Vec<Slot> = Vec::with_capacity(n + inserts.len());
    for orig in base {
        for step in inserts.iter().filter(|s| s.index == orig) {
            slots.push(Slot::Added((*step).clone()));
        }
        if !deleted.contains(&orig) {
            slots.push(Slot::Original(orig));
        }
    }
    for step in inserts.iter().filter(|s| s.index == n + 1) {
        slots.push(Slot::Added((*step).clone()));
    }

    let mut renumber = vec![0usize; n + 1];
    for (i, slot) in slots.iter().enumerate() {
        if let Slot::Original(orig) = slot {
            renumber[*orig] = i + 1;
        }
    }
    let remap = |inputs: &[usize], owner: &str| -> Result<Vec<usize>, ApplyError> {
        inputs
            .iter()
            .map(|&i| match renumber[i] {
                0 => Err(ApplyError::BrokenDataflow(format!(
                    "{owner} takes input from deleted step {i}"
                ))),
                j => Ok(j),
            })
            .collect()
    };

    let mut workflow = Vec::with_capacity(slots.len());
    for (i, slot) in slots.into_iter().enumerate() {
        let index = i + 1;
        let step = match slot {
            Slot::Original(orig) => {
                let old = &pos.workflow[orig - 1];
                let inputs = new_inputs
                    .get(&orig)
                    .map(|v| v.as_slice())
                    .unwrap_or(&old.inputs);
                WorkflowStep {
                    index,
                    role: old.role.clone(),
                    inputs: remap(inputs, &format!("step {orig}"))?,
                    output: new_outputs
                        .get(&orig)
                        .map(|s| (*s).to_string())
                        .unwrap_or_else(|| old.output.clone()),
                }
            }
            Slot::Added(step) => WorkflowStep {
                index,
                inputs: remap(&step.inputs, "the added step")?,
                ..step
            },
        };
        workflow.push(step);
    }
    Ok(workflow)
}
