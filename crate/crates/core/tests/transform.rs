use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::sync::Arc;

use textswarm::gateway::{FnProvider, Gateway, Provider, Script, ScriptedProvider};
use textswarm::model::{
    apply_ops, validate_position, AdjustmentOp, AgentSpec, EvalOutcome, Flaw, FlawCategory,
    FlawReport, Position, PositionUpdateMode, TermOrigin, Velocity, VelocityEntry, WorkflowStep,
};
use textswarm::sim::gen;
use textswarm::transform::{
    apply_velocity_deterministic, CallCtx, FailureLedger, LedgerEntry, ProblemAnalysis,
    PromptLibrary, TransformError, Transformer,
};
use textswarm::Record;

const CTX: CallCtx = CallCtx {
    particle: 0,
    iteration: 0,
    temperature: 0.7,
    seed: 1,
};

fn transformer(provider: Arc<dyn Provider>) -> (Transformer, Arc<Gateway>) {
    let gateway = Arc::new(Gateway::new(provider));
    (
        Transformer::new(
            gateway.clone(),
            Arc::new(PromptLibrary::builtin()),
            "opt",
            "answer questions",
        ),
        gateway,
    )
}

fn scripted(entries: &[(&str, String)]) -> (Transformer, Arc<Gateway>) {
    let mut s = Script::default();
    for (tag, text) in entries {
        s.push_tagged(*tag, text.clone());
    }
    transformer(Arc::new(ScriptedProvider::new(s)))
}

fn fenced(v: serde_json::Value) -> String {
    format!("Here it is.\n```json\n{v}\n```")
}

fn team() -> Position {
    Position::new(
        vec![
            AgentSpec::new("Researcher", "Find facts.", "Be thorough."),
            AgentSpec::new("Writer", "Write.", "Be brief."),
            AgentSpec::new("Editor", "Edit.", "Fix grammar."),
        ],
        vec![
            WorkflowStep::new(1, "Researcher", vec![], "facts"),
            WorkflowStep::new(2, "Writer", vec![1], "draft"),
            WorkflowStep::new(3, "Editor", vec![2], "final answer"),
        ],
    )
}

fn failing_outcome() -> EvalOutcome {
    EvalOutcome::from_scores(vec![
        ("a".into(), 1.0, None),
        ("b".into(), 0.0, Some("wrong total".into())),
    ])
}

#[test]
fn malformed_answer_is_repaired() {
    let (t, gw) = scripted(&[
        ("eval/p0/t0", "I think step 2 is wrong.".into()),
        ("eval/p0/t0/repair1", fenced(json!({"explanation": "bad sum", "steps": [2]}))),
    ]);
    let a = t.evaluate_performance(&team(), &failing_outcome(), &CTX).unwrap();
    assert_eq!(a.implicated_steps, vec![2]);
    let tags: Vec<String> = gw.ledger().entries.into_iter().map(|e| e.tag).collect();
    assert_eq!(tags, ["eval/p0/t0", "eval/p0/t0/repair1"]);
}

#[test]
fn repeated_malformed_answers_give_up() {
    let (t, gw) = scripted(&[
        ("eval/p0/t0", "nope".into()),
        ("eval/p0/t0/repair1", "still nope".into()),
        ("eval/p0/t0/repair2", "{broken".into()),
    ]);
    match t.evaluate_performance(&team(), &failing_outcome(), &CTX) {
        Err(TransformError::UnparseableAfterRepair { op, attempts, .. }) => {
            assert_eq!(op, "eval");
            assert_eq!(attempts.len(), 3);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(gw.ledger().totals.calls, 3);
}

#[test]
fn no_call_without_errors() {
    let (t, gw) = scripted(&[]);
    let perfect = EvalOutcome::from_scores(vec![("a".into(), 1.0, None)]);
    assert_eq!(
        t.evaluate_performance(&team(), &perfect, &CTX).unwrap(),
        ProblemAnalysis::default()
    );
    let empty = t
        .identify_flaws(&team(), &ProblemAnalysis::default(), &perfect, &CTX)
        .unwrap();
    assert!(empty.is_empty());
    assert_eq!(gw.ledger().totals.calls, 0);
}

#[test]
fn out_of_range_steps_are_dropped() {
    let bad = fenced(json!({"explanation": "bad sum", "steps": [2, 9]}));
    let (t, _) = scripted(&[("eval/p0/t0", bad.clone()), ("eval/p0/t0/repair1", bad)]);
    let a = t.evaluate_performance(&team(), &failing_outcome(), &CTX).unwrap();
    assert_eq!(a.implicated_steps, vec![2]);
}

#[test]
fn unknown_category_after_repair_is_an_error() {
    let bad = fenced(json!({"flaws": [{"category": "Vibes", "role": "Writer", "explanation": "meh"}]}));
    let (t, _) = scripted(&[("flaw/p0/t0", bad.clone()), ("flaw/p0/t0/repair1", bad)]);
    let analysis = ProblemAnalysis {
        explanation: "x".into(),
        implicated_steps: vec![2],
    };
    assert_eq!(
        t.identify_flaws(&team(), &analysis, &failing_outcome(), &CTX),
        Err(TransformError::UnknownCategory("Vibes".into()))
    );
}

#[test]
fn flaws_parse_with_labels() {
    let ok = fenced(json!({"flaws": [
        {"category": "Role Policy Deficiency", "role": "Writer", "explanation": "too vague"},
        {"category": "Inappropriate Output", "step": 3, "explanation": "no total"}
    ]}));
    let (t, _) = scripted(&[("flaw/p0/t0", ok)]);
    let analysis = ProblemAnalysis {
        explanation: "x".into(),
        implicated_steps: vec![3],
    };
    let r = t
        .identify_flaws(&team(), &analysis, &failing_outcome(), &CTX)
        .unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r.flaws[0].category, FlawCategory::RolePolicyDeficiency);
    assert_eq!(r.flaws[1].category, FlawCategory::InappropriateOutput);
}

#[test]
fn global_term_needs_a_global_best() {
    let (t, _) = scripted(&[]);
    let flaws = FlawReport::new(
        vec![Flaw::role(FlawCategory::MissingRole, "Checker", "x")],
        failing_outcome(),
    );
    assert_eq!(
        t.global_term(&team(), None, &flaws, &CTX),
        Err(TransformError::GlobalBestUndefined)
    );
}

#[test]
fn ungrounded_failed_adjustment_quote_is_dropped() {
    let flaw = Flaw::role(FlawCategory::RolePolicyDeficiency, "Writer", "vague");
    let prev = Velocity::new(vec![VelocityEntry::new(
        flaw.clone(),
        vec![AdjustmentOp::ModifyRole {
            name: "Writer".into(),
            policy: "Be brief and exact.".into(),
        }],
        TermOrigin::Merged,
    )]);
    let report = FlawReport::new(vec![flaw.clone()], failing_outcome());
    let invented = fenced(json!({"failed_adjustments": [{"flaw": 1, "failed_adjustment": "Delete the Writer"}]}));
    let (t, gw) = scripted(&[
        ("identify_fail/p0/t0", invented.clone()),
        ("identify_fail/p0/t0/repair1", invented),
    ]);
    let ledger = t
        .identify_failed_adjustments(&prev, &report, &report, &CTX)
        .unwrap();
    assert_eq!(ledger, FailureLedger::none_for(std::slice::from_ref(&flaw)));
    assert_eq!(gw.ledger().totals.calls, 2);

    let grounded = fenced(json!({"failed_adjustments": [{"flaw": 1, "failed_adjustment": "\"Be brief and exact.\""}]}));
    let (t, _) = scripted(&[("identify_fail/p0/t0", grounded)]);
    let ledger = t
        .identify_failed_adjustments(&prev, &report, &report, &CTX)
        .unwrap();
    assert_eq!(ledger.quote_for(&flaw), Some("Be brief and exact."));
}

fn op_json(ops: &[AdjustmentOp]) -> serde_json::Value {
    serde_json::to_value(ops).unwrap()
}

#[test]
fn repeating_a_failed_adjustment_is_rejected() {
    let pos = team();
    let flaw = Flaw::role(FlawCategory::RolePolicyDeficiency, "Writer", "vague");
    let op = AdjustmentOp::ModifyRole {
        name: "Writer".into(),
        policy: "Be exact.".into(),
    };
    let ledger = FailureLedger {
        entries: vec![LedgerEntry {
            flaw,
            failed_adjustment: Some(op.canonical()),
        }],
    };
    let same = fenced(json!({"adjustments": [{"flaw": 1, "ops": op_json(std::slice::from_ref(&op))}]}));
    let (t, _) = scripted(&[("fail/p0/t0", same.clone()), ("fail/p0/t0/repair1", same)]);
    assert_eq!(
        t.failure_term(&pos, &ledger, &CTX),
        Err(TransformError::RepetitionDetected(op.canonical()))
    );
}

/// Answers the failure term with a mix of ledgered and fresh operations,
/// drawn from the request seed and the repair round.
fn noisy_failure_model(ledgered: Vec<AdjustmentOp>, fresh: Vec<AdjustmentOp>, n_flaws: usize) -> Arc<dyn Provider> {
    Arc::new(FnProvider::new("noisy", move |req| {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed ^ req.tag.len() as u64);
        let items: Vec<serde_json::Value> = (1..=n_flaws)
            .map(|k| {
                let mut ops = Vec::new();
                if !fresh.is_empty() && rng.gen_bool(0.7) {
                    ops.push(fresh[rng.gen_range(0..fresh.len())].clone());
                }
                if !ledgered.is_empty() && rng.gen_bool(0.4) {
                    ops.push(ledgered[rng.gen_range(0..ledgered.len())].clone());
                }
                json!({"flaw": k, "ops": op_json(&ops)})
            })
            .collect();
        Ok(fenced(json!({ "adjustments": items })))
    }))
}

#[test]
fn failure_term_never_returns_a_ledgered_operation() {
    let (mut accepted, mut rejected) = (0, 0);
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = gen::position(&mut rng, 5, 6);
        let flaws: Vec<Flaw> = (0..rng.gen_range(1..4)).map(|_| gen::flaw(&mut rng, &pos)).collect();
        let ledgered = gen::valid_ops(&mut rng, &pos, 3);
        let fresh: Vec<AdjustmentOp> = gen::valid_ops(&mut rng, &pos, 4)
            .into_iter()
            .filter(|op| !ledgered.iter().any(|l| l.canonical().contains(&op.canonical())))
            .collect();
        let ledger = FailureLedger {
            entries: flaws
                .iter()
                .enumerate()
                .map(|(i, f)| LedgerEntry {
                    flaw: f.clone(),
                    failed_adjustment: ledgered.get(i).map(|op| format!("[{}]", op.canonical())),
                })
                .collect(),
        };
        let (t, _) = transformer(noisy_failure_model(ledgered.clone(), fresh, flaws.len()));
        let ctx = CallCtx { seed, ..CTX };
        match t.failure_term(&pos, &ledger, &ctx) {
            Ok(vel) => {
                accepted += 1;
                let quotes: Vec<&str> = ledger.quotes().collect();
                for op in vel.ops() {
                    let payload = op.canonical();
                    assert!(
                        !quotes.iter().any(|q| q.contains(&payload)),
                        "seed {seed}: {payload} repeats a ledgered adjustment"
                    );
                }
            }
            Err(TransformError::RepetitionDetected(_)) => rejected += 1,
            Err(other) => panic!("seed {seed}: {other:?}"),
        }
    }
    assert_eq!(accepted + rejected, 200);
    assert!(accepted > 0 && rejected > 0, "{accepted} accepted, {rejected} rejected");
}

#[test]
fn merge_without_competing_candidates_makes_no_call() {
    let (t, gw) = scripted(&[]);
    let pos = team();
    let flaw = Flaw::role(FlawCategory::MissingRole, "Checker", "x");
    let flaws = FlawReport::new(vec![flaw.clone()], failing_outcome());
    let ops = vec![AdjustmentOp::AddRole {
        role: AgentSpec::new("Checker", "Check.", "Be strict."),
    }];
    let failure = Velocity::new(vec![VelocityEntry::new(flaw.clone(), ops.clone(), TermOrigin::FailureTerm)]);
    let empty = Velocity::new(vec![VelocityEntry::new(flaw.clone(), vec![], TermOrigin::PersonalTerm)]);
    let merged = t
        .merge_velocity(&pos, &flaws, &failure, &empty, &Velocity::empty(), &FailureLedger::none_for(&[flaw]), &CTX)
        .unwrap();
    assert_eq!(merged.ops().cloned().collect::<Vec<_>>(), ops);
    assert_eq!(gw.ledger().totals.calls, 0);
}

#[test]
fn non_conforming_rewrite_falls_back() {
    let pos = team();
    let flaw = Flaw::role(FlawCategory::MissingRole, "Checker", "x");
    let vel = Velocity::new(vec![VelocityEntry::new(
        flaw,
        vec![AdjustmentOp::AddRole {
            role: AgentSpec::new("Checker", "Check.", "Be strict."),
        }],
        TermOrigin::Merged,
    )]);
    // drops the Editor
    let wrong = fenced(json!({
        "roles": [
            {"name": "Researcher", "responsibility": "Find facts.", "policy": "Be thorough."},
            {"name": "Writer", "responsibility": "Write.", "policy": "Be brief."},
            {"name": "Checker", "responsibility": "Check.", "policy": "Be strict."}
        ],
        "workflow": [
            {"step": 1, "role": "Researcher", "inputs": [], "output": "facts"},
            {"step": 2, "role": "Writer", "inputs": [1], "output": "final answer"}
        ]
    }));
    let (t, gw) = scripted(&[("pos/p0/t0", wrong.clone()), ("pos/p0/t0/repair1", wrong)]);
    let next = t
        .apply_velocity(&pos, &vel, PositionUpdateMode::Llm, &CTX)
        .unwrap();
    assert_eq!(next, apply_velocity_deterministic(&pos, &vel));
    assert_eq!(gw.ledger().totals.calls, 2);
}

#[test]
fn three_flaws_five_operations() {
    let pos = team();
    let f = |c, s: &str| Flaw::role(c, s, "x");
    let vel = Velocity::new(vec![
        VelocityEntry::new(
            f(FlawCategory::MissingRole, "Checker"),
            vec![
                AdjustmentOp::AddRole {
                    role: AgentSpec::new("Checker", "Check.", "Be strict."),
                },
                AdjustmentOp::AddStep {
                    step: WorkflowStep::new(3, "Checker", vec![2], "checked draft"),
                },
            ],
            TermOrigin::Merged,
        ),
        VelocityEntry::new(
            f(FlawCategory::RolePolicyDeficiency, "Writer"),
            vec![AdjustmentOp::ModifyRole {
                name: "Writer".into(),
                policy: "Show every calculation.".into(),
            }],
            TermOrigin::Merged,
        ),
        VelocityEntry::new(
            Flaw::step(FlawCategory::InsufficientInput, 3, None, "x"),
            vec![
                AdjustmentOp::ModifyInput {
                    step: 3,
                    inputs: vec![1, 2],
                },
                AdjustmentOp::ModifyOutput {
                    step: 2,
                    output: "worked draft".into(),
                },
            ],
            TermOrigin::Merged,
        ),
    ]);
    assert_eq!(vel.op_count(), 5);
    // inputs and outputs refer to the pre-update workflow; the new step goes
    // before the old step 3, which becomes step 4
    let expected = Position::new(
        vec![
            AgentSpec::new("Researcher", "Find facts.", "Be thorough."),
            AgentSpec::new("Writer", "Write.", "Show every calculation."),
            AgentSpec::new("Editor", "Edit.", "Fix grammar."),
            AgentSpec::new("Checker", "Check.", "Be strict."),
        ],
        vec![
            WorkflowStep::new(1, "Researcher", vec![], "facts"),
            WorkflowStep::new(2, "Writer", vec![1], "worked draft"),
            WorkflowStep::new(3, "Checker", vec![2], "checked draft"),
            WorkflowStep::new(4, "Editor", vec![1, 2], "final answer"),
        ],
    );
    let got = apply_velocity_deterministic(&pos, &vel);
    assert_eq!(got.to_record(), expected.to_record());
    assert!(validate_position(&got).is_valid());
}

#[test]
fn fallback_equals_the_operation_oracle_on_1000_pairs() {
    // a model that never produces a usable team
    let (t, _) = transformer(Arc::new(FnProvider::new("mute", |_| Ok("no".to_string()))));
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = gen::position(&mut rng, 5, 6);
        let vel = gen::velocity(&mut rng, &pos, 5);
        let all: Vec<AdjustmentOp> = vel.ops().cloned().collect();
        let oracle = apply_ops(&pos, &all).expect("generated operations apply");
        let ctx = CallCtx { seed, ..CTX };
        for mode in [PositionUpdateMode::Llm, PositionUpdateMode::Deterministic] {
            let got = t.apply_velocity(&pos, &vel, mode, &ctx).unwrap();
            assert_eq!(got.to_record(), oracle.to_record(), "seed {seed} {mode:?}");
            assert!(validate_position(&got).is_valid(), "seed {seed}");
        }
    }
}
