use crate::model::{apply_ops, validate_position, AdjustmentOp, Position, Velocity};

/// Applies every operation of `vel`. When the full list does not apply, entries
/// are kept in order as long as the accumulated list still applies, and the
/// rest are dropped.
pub fn apply_velocity_deterministic(pos: &Position, vel: &Velocity) -> Position {
    let all: Vec<AdjustmentOp> = vel.ops().cloned().collect();
    if all.is_empty() {
        return pos.clone();
    }
    if let Ok(next) = apply_ops(pos, &all) {
        return next;
    }
    let mut kept: Vec<AdjustmentOp> = Vec::new();
    for entry in vel.entries.iter().filter(|e| !e.ops.is_empty()) {
        let mut candidate = kept.clone();
        candidate.extend(entry.ops.iter().cloned());
        match apply_ops(pos, &candidate) {
            Ok(_) => kept = candidate,
            Err(err) => {
                tracing::warn!(flaw = %entry.flaw, %err, "dropping adjustment that does not apply")
            }
        }
    }
    apply_ops(pos, &kept).unwrap_or_else(|_| pos.clone())
}

/// Differences between a rewritten team and the deterministic result that the
/// rewrite is not allowed to have. Policy wording of modified roles and the
/// content of added roles are free.
pub fn conformance_problems(
    pos: &Position,
    oracle: &Position,
    candidate: &Position,
) -> Vec<String> {
    let mut problems = Vec::new();
    let mut want: Vec<&str> = oracle.agents.iter().map(|a| a.name.as_str()).collect();
    let mut got: Vec<&str> = candidate.agents.iter().map(|a| a.name.as_str()).collect();
    want.sort_unstable();
    got.sort_unstable();
    if want != got {
        problems.push(format!(
            "the team must have exactly the roles {want:?}, found {got:?}"
        ));
    }
    for target in &oracle.agents {
        let Some(c) = candidate.agent(&target.name) else {
            continue;
        };
        match pos.agent(&target.name) {
            Some(orig) if orig == target => {
                if c != target {
                    problems.push(format!(
                        "role {} is not modified by the plan and must stay unchanged",
                        target.name
                    ));
                }
            }
            Some(orig) if orig.responsibility == target.responsibility
                && c.responsibility != target.responsibility => {
                    problems.push(format!("role {} must keep its responsibility", target.name));
                }
            _ => {}
        }
    }
    let report = validate_position(candidate);
    problems.extend(report.messages());
    problems
}
