//! Seeded generators of valid domain values.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{
    apply_ops, AdjustmentOp, AgentSpec, EvalOutcome, Flaw, FlawCategory, FlawReport, Position,
    TermOrigin, Velocity, VelocityEntry, WorkflowStep,
};

const WORDS: &[&str] = &[
    "plan",
    "verify",
    "budget",
    "route",
    "hotel",
    "draft",
    "summarize",
    "check",
    "\"quoted\"",
    "constraints",
    "itinerary",
    "reviewer",
    "émigré",
    "step-by-step",
    "ensure",
    "compile",
    "list",
    "tab\tseparated",
    "100%",
    "{braces}",
    "line\nbreak",
    "final",
    "answer",
    "cross-verify",
];

const ROLE_NAMES: &[&str] = &[
    "Planner",
    "Verifier",
    "Integrator",
    "Quality Assurance Specialist",
    "Budget Analyst",
    "Researcher",
    "Editor",
    "Scheduler",
];

pub fn words<R: Rng>(rng: &mut R, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fresh_name<R: Rng>(rng: &mut R, taken: &[&str]) -> String {
    let base = ROLE_NAMES.choose(rng).expect("non-empty");
    if !taken.contains(base) {
        return (*base).to_string();
    }
    (2..)
        .map(|k| format!("{base} {k}"))
        .find(|n| !taken.contains(&n.as_str()))
        .expect("infinite")
}

pub fn agent<R: Rng>(rng: &mut R, taken: &[&str]) -> AgentSpec {
    AgentSpec::new(fresh_name(rng, taken), words(rng, 1, 6), words(rng, 1, 10))
}

fn inputs_before<R: Rng>(rng: &mut R, index: usize) -> Vec<usize> {
    (1..index).filter(|_| rng.gen_bool(0.4)).collect()
}

/// A valid position with 1..=max_agents agents and 1..=max_steps steps.
pub fn position<R: Rng>(rng: &mut R, max_agents: usize, max_steps: usize) -> Position {
    let m = rng.gen_range(1..=max_agents.max(1));
    let mut agents: Vec<AgentSpec> = Vec::with_capacity(m);
    for _ in 0..m {
        let taken: Vec<&str> = agents.iter().map(|a| a.name.as_str()).collect();
        let a = agent(rng, &taken);
        agents.push(a);
    }
    let n = rng.gen_range(1..=max_steps.max(1));
    let workflow = (1..=n)
        .map(|i| {
            let role = agents.choose(rng).expect("non-empty").name.clone();
            WorkflowStep::new(i, role, inputs_before(rng, i), words(rng, 1, 6))
        })
        .collect();
    Position::new(agents, workflow).with_provenance(words(rng, 0, 3))
}

/// A random topological order of the workflow (a dataflow-respecting re-order).
fn topological_order<R: Rng>(rng: &mut R, pos: &Position) -> Vec<usize> {
    let n = pos.workflow.len();
    let mut placed = vec![false; n + 1];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let ready: Vec<usize> = pos
            .workflow
            .iter()
            .filter(|s| !placed[s.index] && s.inputs.iter().all(|i| placed[*i]))
            .map(|s| s.index)
            .collect();
        let pick = *ready.choose(rng).expect("acyclic workflow");
        placed[pick] = true;
        order.push(pick);
    }
    order
}

fn candidate_op<R: Rng>(rng: &mut R, pos: &Position, pending: &[AdjustmentOp]) -> AdjustmentOp {
    let n = pos.workflow.len();
    let mut role_names: Vec<&str> = pos.agents.iter().map(|a| a.name.as_str()).collect();
    for op in pending {
        if let AdjustmentOp::AddRole { role } = op {
            role_names.push(&role.name);
        }
    }
    match rng.gen_range(0..8) {
        0 => AdjustmentOp::AddRole {
            role: agent(rng, &role_names),
        },
        1 => AdjustmentOp::ModifyRole {
            name: pos.agents.choose(rng).expect("agents").name.clone(),
            policy: words(rng, 1, 10),
        },
        2 => AdjustmentOp::DeleteRole {
            name: pos.agents.choose(rng).expect("agents").name.clone(),
        },
        3 => {
            let index = rng.gen_range(1..=n + 1);
            AdjustmentOp::AddStep {
                step: WorkflowStep::new(
                    index,
                    role_names.choose(rng).expect("roles").to_string(),
                    inputs_before(rng, index),
                    words(rng, 1, 6),
                ),
            }
        }
        4 => {
            let step = rng.gen_range(1..=n);
            AdjustmentOp::ModifyInput {
                step,
                inputs: inputs_before(rng, step),
            }
        }
        5 => AdjustmentOp::ModifyOutput {
            step: rng.gen_range(1..=n),
            output: words(rng, 1, 6),
        },
        6 => AdjustmentOp::DeleteStep {
            step: rng.gen_range(1..=n),
        },
        _ => AdjustmentOp::ReorderSteps {
            order: topological_order(rng, pos),
        },
    }
}

/// Up to `max_ops` operations that `apply_ops` accepts together on `pos`.
pub fn valid_ops<R: Rng>(rng: &mut R, pos: &Position, max_ops: usize) -> Vec<AdjustmentOp> {
    let target = rng.gen_range(0..=max_ops);
    let mut ops = Vec::new();
    let mut attempts = 0;
    while ops.len() < target && attempts < target * 8 {
        attempts += 1;
        let op = candidate_op(rng, pos, &ops);
        ops.push(op);
        if apply_ops(pos, &ops).is_err() {
            ops.pop();
        }
    }
    ops
}

/// A flaw whose target resolves against `pos`.
pub fn flaw<R: Rng>(rng: &mut R, pos: &Position) -> Flaw {
    let n = pos.workflow.len();
    let category = *FlawCategory::ALL.choose(rng).expect("non-empty");
    let explanation = words(rng, 1, 8);
    match category {
        FlawCategory::MissingRole => {
            let taken: Vec<&str> = pos.agents.iter().map(|a| a.name.as_str()).collect();
            Flaw::role(category, fresh_name(rng, &taken), explanation)
        }
        FlawCategory::RedundantRole | FlawCategory::RolePolicyDeficiency => Flaw::role(
            category,
            pos.agents.choose(rng).expect("agents").name.clone(),
            explanation,
        ),
        FlawCategory::MissingWorkflowStep => Flaw::gap(rng.gen_range(0..=n), explanation),
        _ => {
            let index = rng.gen_range(1..=n);
            let role = rng
                .gen_bool(0.5)
                .then(|| pos.workflow[index - 1].role.clone());
            Flaw::step(category, index, role, explanation)
        }
    }
}

pub fn outcome<R: Rng>(rng: &mut R) -> EvalOutcome {
    let k = rng.gen_range(0..6);
    EvalOutcome::from_scores(
        (0..k)
            .map(|i| {
                let ok = rng.gen_bool(0.5);
                let score = if ok {
                    1.0
                } else {
                    rng.gen_range(0..4) as f64 / 4.0
                };
                let err = (score < 1.0).then(|| words(rng, 1, 6));
                (format!("inst-{i}"), score, err)
            })
            .collect(),
    )
}

pub fn flaw_report<R: Rng>(rng: &mut R, pos: &Position) -> FlawReport {
    let source = outcome(rng);
    let k = if source.is_max() {
        0
    } else {
        rng.gen_range(1..4)
    };
    FlawReport::new((0..k).map(|_| flaw(rng, pos)).collect(), source)
}

/// A velocity whose operations, taken together, apply cleanly to `pos`.
pub fn velocity<R: Rng>(rng: &mut R, pos: &Position, max_ops: usize) -> Velocity {
    let ops = valid_ops(rng, pos, max_ops);
    let entries_n = rng.gen_range(1..=3usize);
    let mut entries: Vec<VelocityEntry> = (0..entries_n)
        .map(|_| {
            let origin = *[
                TermOrigin::FailureTerm,
                TermOrigin::PersonalTerm,
                TermOrigin::GlobalTerm,
                TermOrigin::Init,
                TermOrigin::Merged,
            ]
            .choose(rng)
            .expect("non-empty");
            VelocityEntry::new(flaw(rng, pos), Vec::new(), origin)
                .with_failed_adjustment(rng.gen_bool(0.3).then(|| words(rng, 1, 5)))
                .with_insight(rng.gen_bool(0.3).then(|| words(rng, 1, 5)))
        })
        .collect();
    for op in ops {
        let k = rng.gen_range(0..entries.len());
        entries[k].ops.push(op);
    }
    Velocity::new(entries)
}
