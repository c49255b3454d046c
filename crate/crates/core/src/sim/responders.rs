//! Offline stand-ins for the optimizer and executor models. Both answer every
//! operator from the structured inputs embedded in its prompt.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use std::sync::Arc;

use super::gen;
use super::prompt::{fenced, flaw_json, record, roles_and_workflow, section, team_json};
use crate::gateway::{CompletionRequest, FnProvider, Provider, ProviderError};
use crate::model::{
    AdjustmentOp, AgentSpec, EvalOutcome, Flaw, FlawCategory, FlawReport, Position, Velocity,
    WorkflowStep,
};
use crate::tasks::synthetic::{missing_features, FEATURES};
use crate::transform::{apply_velocity_deterministic, FailureLedger, MergeInput};

/// Order in which the convergence responder repairs missing features.
pub const FIX_ORDER: [usize; 5] = [0, 3, 2, 1, 4];

/// A three-role chain with none of the synthetic features.
pub fn initial_team() -> Position {
    Position::new(
        vec![
            AgentSpec::new(
                "Researcher",
                "Collect the facts the brief needs.",
                "List each fact on its own line.",
            ),
            AgentSpec::new(
                "Writer",
                "Draft the brief from the facts.",
                "Write plainly and keep it short.",
            ),
            AgentSpec::new(
                "Editor",
                "Polish the draft.",
                "Fix grammar and tighten wording.",
            ),
        ],
        vec![
            WorkflowStep::new(1, "Researcher", vec![], "fact list"),
            WorkflowStep::new(2, "Writer", vec![1], "draft brief"),
            WorkflowStep::new(3, "Editor", vec![2], "edited brief"),
        ],
    )
}

fn tag(feature: usize) -> String {
    format!("[{}]", FEATURES[feature].id)
}

/// The flaw that names a missing feature.
pub fn feature_flaw(feature: usize, pos: &Position) -> Flaw {
    let n = pos.workflow.len();
    let last = pos.final_step().map(|s| s.role.clone());
    let why = format!("{} {}", tag(feature), FEATURES[feature].missing);
    match feature {
        0 => Flaw::role(FlawCategory::MissingRole, "Verifier", why),
        1 => Flaw::step(FlawCategory::InsufficientInput, n, last, why),
        2 => Flaw::role(FlawCategory::MissingRole, "Planner", why),
        3 => Flaw::role(
            FlawCategory::RolePolicyDeficiency,
            pos.agents[0].name.clone(),
            why,
        ),
        _ => Flaw::step(FlawCategory::InappropriateOutput, n, last, why),
    }
}

/// Operations that add `feature` to `pos` without removing any other.
pub fn feature_fix(feature: usize, pos: &Position) -> Vec<AdjustmentOp> {
    let n = pos.workflow.len();
    match feature {
        0 => vec![
            AdjustmentOp::AddRole {
                role: AgentSpec::new(
                    "Verifier",
                    "Check the draft against the facts.",
                    "Flag every unsupported claim.",
                ),
            },
            AdjustmentOp::AddStep {
                step: WorkflowStep::new(
                    n,
                    "Verifier",
                    if n >= 2 { vec![n - 1] } else { vec![] },
                    "verification notes",
                ),
            },
        ],
        1 => vec![AdjustmentOp::ModifyInput {
            step: n,
            inputs: (1..n).collect(),
        }],
        2 => vec![
            AdjustmentOp::AddRole {
                role: AgentSpec::new(
                    "Planner",
                    "Break the question into sub-questions.",
                    "List sub-questions in order.",
                ),
            },
            AdjustmentOp::AddStep {
                step: WorkflowStep::new(1, "Planner", vec![], "research plan"),
            },
        ],
        3 => vec![AdjustmentOp::ModifyRole {
            name: pos.agents[0].name.clone(),
            policy: format!("{} Always cite sources.", pos.agents[0].policy),
        }],
        _ => vec![AdjustmentOp::ModifyOutput {
            step: n,
            output: "final report".into(),
        }],
    }
}

fn feature_of(flaw: &Flaw) -> Option<usize> {
    FEATURES
        .iter()
        .position(|f| flaw.explanation.starts_with(&format!("[{}]", f.id)))
}

fn op_values(ops: &[AdjustmentOp]) -> Vec<Value> {
    ops.iter()
        .map(|op| serde_json::to_value(op).expect("op json"))
        .collect()
}

fn plan(entries: Vec<Value>) -> String {
    fenced(&json!({ "adjustments": entries }))
}

fn missing_input(what: &str) -> ProviderError {
    ProviderError::Config(format!("simulated model: prompt has no readable {what}"))
}

/// Adjustment plan fixing only the flaw whose feature comes first in [`FIX_ORDER`].
fn fix_one(flaws: &[Flaw], pos: &Position) -> String {
    let pick = flaws
        .iter()
        .enumerate()
        .filter_map(|(i, f)| feature_of(f).map(|k| (i, k)))
        .min_by_key(|(_, k)| FIX_ORDER.iter().position(|o| o == k));
    plan(match pick {
        Some((i, k)) => vec![
            json!({ "flaw": i + 1, "failed_adjustment": null, "ops": op_values(&feature_fix(k, pos)) }),
        ],
        None => Vec::new(),
    })
}

fn forward_plan(pos: &Position) -> String {
    fenced(&json!({
        "calls": pos.workflow.iter().map(|s| json!({"role": s.role, "inputs": s.inputs, "output": s.output})).collect::<Vec<_>>()
    }))
}

/// Answers as a model that repairs exactly one missing synthetic feature per
/// update and never uses the best-team terms.
pub fn convergence_respond(req: &CompletionRequest) -> Result<String, ProviderError> {
    let p = req.prompt.as_str();
    let team = |tag: &str| record::<Position>(p, tag).ok_or_else(|| missing_input(tag));
    Ok(match req.op() {
        "init_team" => fenced(&team_json(&initial_team())),
        "eval" => {
            let pos = team("workflow")?;
            let outcome: EvalOutcome =
                record(p, "problem").ok_or_else(|| missing_input("problem"))?;
            fenced(&json!({ "explanation": outcome.error_lines(), "steps": [pos.workflow.len()] }))
        }
        "flaw" => {
            let pos = team("current team")?;
            let flaws: Vec<Value> = missing_features(&pos)
                .into_iter()
                .map(|k| flaw_json(&feature_flaw(k, &pos)))
                .collect();
            fenced(&json!({ "flaws": flaws }))
        }
        "init_vel" => {
            let report: FlawReport =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            fix_one(&report.flaws, &team("current team")?)
        }
        "fail" => {
            let ledger: FailureLedger =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            let flaws: Vec<Flaw> = ledger.entries.into_iter().map(|e| e.flaw).collect();
            fix_one(&flaws, &team("current team")?)
        }
        "identify_fail" => {
            let report: FlawReport =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            fenced(&json!({
                "failed_adjustments": (1..=report.len()).map(|i| json!({"flaw": i, "failed_adjustment": null})).collect::<Vec<_>>()
            }))
        }
        "pers" | "glob" => {
            let report: FlawReport =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            plan(
                (1..=report.len())
                    .map(|i| json!({"flaw": i, "insights": null, "quotes": [], "ops": []}))
                    .collect(),
            )
        }
        "vel" => {
            let input: MergeInput =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            plan(
                input
                    .flaws
                    .iter()
                    .map(|item| {
                        let ops = [
                            &item.recommended_adjustment,
                            &item.past_best_adjustment,
                            &item.best_team_adjustment,
                        ]
                        .into_iter()
                        .find(|o| !o.is_empty())
                        .cloned()
                        .unwrap_or_default();
                        json!({"flaw": item.flaw, "ops": op_values(&ops)})
                    })
                    .collect(),
            )
        }
        "pos" => {
            let pos = roles_and_workflow(p).ok_or_else(|| missing_input("roles and workflow"))?;
            let vel: Velocity = record(p, "plan").ok_or_else(|| missing_input("plan"))?;
            fenced(&team_json(&apply_velocity_deterministic(&pos, &vel)))
        }
        "write_forward" => {
            let pos = roles_and_workflow(p).ok_or_else(|| missing_input("roles and workflow"))?;
            forward_plan(&pos)
        }
        "exec" => "done".to_string(),
        other => {
            return Err(ProviderError::Unscripted(format!(
                "simulated model has no answer for `{other}`"
            )))
        }
    })
}

pub fn convergence_provider() -> Arc<dyn Provider> {
    Arc::new(FnProvider::new("sim-convergence", convergence_respond))
}

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Lines of a record that hold one adjustment operation each.
fn op_lines(record_text: &str) -> Vec<&str> {
    record_text
        .lines()
        .map(|l| l.trim().trim_end_matches(','))
        .filter(|l| l.starts_with("{\"op\""))
        .collect()
}

/// Answers every operator with seeded random but well-typed content, with
/// occasional malformed, ungrounded or non-conforming answers.
pub fn random_respond(req: &CompletionRequest) -> Result<String, ProviderError> {
    let p = req.prompt.as_str();
    let mut rng = crate::seed::rng(req.seed ^ fnv(p) ^ fnv(&req.tag));
    if req.op() != "exec" && rng.gen_bool(0.05) {
        return Ok("I am not sure how to answer in the requested format.".into());
    }
    let rng = &mut rng;
    let team = |tag: &str| record::<Position>(p, tag).ok_or_else(|| missing_input(tag));
    let some_ops =
        |rng: &mut rand_chacha::ChaCha8Rng, pos: &Position| op_values(&gen::valid_ops(rng, pos, 2));
    Ok(match req.op() {
        "init_team" => fenced(&team_json(&gen::position(rng, 4, 4))),
        "eval" => {
            let n = team("workflow")?.workflow.len();
            let steps: Vec<usize> = (1..=n + 1).filter(|_| rng.gen_bool(0.4)).collect();
            fenced(&json!({ "explanation": gen::words(rng, 3, 12), "steps": steps }))
        }
        "flaw" => {
            let pos = team("current team")?;
            let k = rng.gen_range(1..=3);
            let flaws: Vec<Value> = (0..k).map(|_| flaw_json(&gen::flaw(rng, &pos))).collect();
            fenced(&json!({ "flaws": flaws }))
        }
        "init_vel" => {
            let pos = team("current team")?;
            let report: FlawReport =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            plan(
                (1..=report.len())
                    .map(|i| json!({"flaw": i, "ops": some_ops(rng, &pos)}))
                    .collect(),
            )
        }
        "identify_fail" => {
            let report: FlawReport =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            let previous = section(p, "previous adjustment plan").unwrap_or("");
            let quotes = op_lines(previous);
            fenced(&json!({
                "failed_adjustments": (1..=report.len()).map(|i| {
                    let q = if rng.gen_bool(0.5) { quotes.choose(rng).copied() } else { None };
                    json!({"flaw": i, "failed_adjustment": q})
                }).collect::<Vec<_>>()
            }))
        }
        "fail" => {
            let pos = team("current team")?;
            let ledger: FailureLedger =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            plan(
                (1..=ledger.entries.len())
                    .map(|i| json!({"flaw": i, "failed_adjustment": null, "ops": some_ops(rng, &pos)}))
                    .collect(),
            )
        }
        "pers" | "glob" => {
            let pos = team("current team")?;
            let best_tag = if req.op() == "pers" {
                "personal best team"
            } else {
                "global best team"
            };
            let best = team(best_tag)?;
            let report: FlawReport =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            let fields: Vec<&str> = best
                .text_fields()
                .filter(|t| !t.trim().is_empty())
                .collect();
            plan(
                (1..=report.len())
                    .map(|i| {
                        if rng.gen_bool(0.3) {
                            return json!({"flaw": i, "insights": null, "quotes": [], "ops": []});
                        }
                        let quote = if rng.gen_bool(0.1) {
                            "a phrase the best team never used".to_string()
                        } else {
                            fields.choose(rng).copied().unwrap_or("").to_string()
                        };
                        json!({"flaw": i, "insights": format!("The best team says \"{quote}\"."), "quotes": [quote], "ops": some_ops(rng, &pos)})
                    })
                    .collect(),
            )
        }
        "vel" => {
            let pos = team("current team")?;
            let input: MergeInput =
                record(p, "feedback").ok_or_else(|| missing_input("feedback"))?;
            plan(
                input
                    .flaws
                    .iter()
                    .map(|item| {
                        let candidates: Vec<&Vec<AdjustmentOp>> = [
                            &item.recommended_adjustment,
                            &item.past_best_adjustment,
                            &item.best_team_adjustment,
                        ]
                        .into_iter()
                        .filter(|o| !o.is_empty())
                        .collect();
                        let ops = match candidates.choose(rng) {
                            Some(o) if rng.gen_bool(0.8) => op_values(o),
                            _ => some_ops(rng, &pos),
                        };
                        json!({"flaw": item.flaw, "ops": ops})
                    })
                    .collect(),
            )
        }
        "pos" => {
            let pos = roles_and_workflow(p).ok_or_else(|| missing_input("roles and workflow"))?;
            let vel: Velocity = record(p, "plan").ok_or_else(|| missing_input("plan"))?;
            let mut next = apply_velocity_deterministic(&pos, &vel);
            if rng.gen_bool(0.2) {
                if let Some(a) = next.agents.first_mut() {
                    a.responsibility.push_str(" (rewritten)");
                }
            }
            fenced(&team_json(&next))
        }
        "write_forward" => {
            let pos = roles_and_workflow(p).ok_or_else(|| missing_input("roles and workflow"))?;
            forward_plan(&pos)
        }
        "exec" => gen::words(rng, 1, 8),
        other => {
            return Err(ProviderError::Unscripted(format!(
                "simulated model has no answer for `{other}`"
            )))
        }
    })
}

pub fn random_provider() -> Arc<dyn Provider> {
    Arc::new(FnProvider::new("sim-random", random_respond))
}
