//! Shared scenarios for the integration tests and the acceptance harness.

use serde_json::json;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use textswarm::gateway::{
    Completion, CompletionRequest, Gateway, Provider, ProviderError, Script, ScriptedProvider,
};
use textswarm::model::{
    AdjustmentOp, AgentSpec, EvalOutcome, Flaw, FlawCategory, FlawReport, Position, SwarmConfig,
    TermOrigin, Velocity, VelocityEntry, WorkflowStep,
};
use textswarm::swarm::{RunReport, Swarm};
use textswarm::tasks::synthetic;
use textswarm::transform::{
    FailureLedger, MergeInput, MergeItem, Operator, ProblemAnalysis, PromptLibrary,
};
use textswarm::Record;

struct Recorder {
    inner: ScriptedProvider,
    calls: Mutex<Vec<(String, String)>>,
}

impl Provider for Recorder {
    fn name(&self) -> &str {
        "recorder"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<Completion, ProviderError> {
        self.calls
            .lock()
            .unwrap()
            .push((req.tag.clone(), req.prompt.clone()));
        self.inner.complete(req)
    }
}

fn fenced(v: serde_json::Value) -> String {
    format!("```json\n{v}\n```")
}

fn team_wire(pos: &Position) -> serde_json::Value {
    json!({
        "roles": pos.agents.iter().map(|a| json!({"name": a.name, "responsibility": a.responsibility, "policy": a.policy})).collect::<Vec<_>>(),
        "workflow": pos.workflow.iter().map(|s| json!({"step": s.index, "role": s.role, "inputs": s.inputs, "output": s.output})).collect::<Vec<_>>(),
    })
}

fn researcher() -> AgentSpec {
    AgentSpec::new(
        "Researcher",
        "Collect facts.",
        "One fact per line. Always cite sources.",
    )
}

fn writer() -> AgentSpec {
    AgentSpec::new("Writer", "Write the brief.", "Be short.")
}

fn verifier() -> AgentSpec {
    AgentSpec::new("Verifier", "Check the brief.", "Flag unsupported claims.")
}

fn planner() -> AgentSpec {
    AgentSpec::new("Planner", "Split the question.", "List sub-questions.")
}

fn outcome(present: &[&str]) -> EvalOutcome {
    let missing = [
        ("f1", "F1", "no role whose name contains 'verifier' checks the result"),
        ("f2", "F2", "no step combines the outputs of two or more earlier steps"),
        ("f3", "F3", "no role whose name contains 'planner' plans the work"),
        ("f4", "F4", "no role policy requires to cite sources"),
        ("f5", "F5", "the final step does not produce a final report"),
    ];
    EvalOutcome::from_scores(
        missing
            .iter()
            .map(|(id, f, why)| {
                if present.contains(f) {
                    (id.to_string(), 1.0, None)
                } else {
                    (id.to_string(), 0.0, Some(format!("missing feature {f}: {why}")))
                }
            })
            .collect(),
    )
}

/// One particle, one iteration, every answer scripted.
pub struct TraceRun {
    /// (tag, prompt) of every provider call, in order.
    pub calls: Vec<(String, String)>,
    /// The same, simulated by hand from the search loop.
    pub expected: Vec<(&'static str, String)>,
    pub report: RunReport,
    /// Global best expected after the iteration.
    pub best: Position,
    pub elapsed: Duration,
}

pub const TRACE_OPS: [(usize, &str); 15] = [
    (0, "init_team"), (0, "evaluate"), (0, "eval"), (0, "flaw"), (0, "init_vel"), (0, "pos"),
    (1, "evaluate"), (1, "eval"), (1, "flaw"), (1, "identify_fail"), (1, "fail"), (1, "pers"),
    (1, "glob"), (1, "vel"), (1, "pos"),
];

pub fn trace_run() -> TraceRun {
    let task = synthetic::DESCRIPTION.to_string();
    // x0: Researcher -> Writer; has only F4
    let x0 = Position::new(
        vec![researcher(), writer()],
        vec![
            WorkflowStep::new(1, "Researcher", vec![], "fact list"),
            WorkflowStep::new(2, "Writer", vec![1], "brief"),
        ],
    );
    // x1 = x0 + Verifier at the end; F1 and F4
    let x1 = Position::new(
        vec![researcher(), writer(), verifier()],
        vec![
            WorkflowStep::new(1, "Researcher", vec![], "fact list"),
            WorkflowStep::new(2, "Writer", vec![1], "brief"),
            WorkflowStep::new(3, "Verifier", vec![2], "checked brief"),
        ],
    );
    // x2 = x1 + Planner in front
    let x2 = Position::new(
        vec![researcher(), writer(), verifier(), planner()],
        vec![
            WorkflowStep::new(1, "Planner", vec![], "plan"),
            WorkflowStep::new(2, "Researcher", vec![], "fact list"),
            WorkflowStep::new(3, "Writer", vec![2], "brief"),
            WorkflowStep::new(4, "Verifier", vec![3], "checked brief"),
        ],
    );
    let v0_ops = vec![
        AdjustmentOp::AddRole { role: verifier() },
        AdjustmentOp::AddStep {
            step: WorkflowStep::new(3, "Verifier", vec![2], "checked brief"),
        },
    ];
    let fail_ops = vec![
        AdjustmentOp::AddRole { role: planner() },
        AdjustmentOp::AddStep {
            step: WorkflowStep::new(1, "Planner", vec![], "plan"),
        },
    ];
    let glob_ops = vec![AdjustmentOp::AddRole {
        role: AgentSpec::new("Planner", "Plan.", "Think first."),
    }];
    let flaw0 = Flaw::role(FlawCategory::MissingRole, "Verifier", "nobody checks");
    let flaw1 = Flaw::role(FlawCategory::MissingRole, "Planner", "nobody plans");
    let analysis0 = ProblemAnalysis {
        explanation: "the brief is unchecked".into(),
        implicated_steps: vec![2],
    };
    let analysis1 = ProblemAnalysis {
        explanation: "the work is unplanned".into(),
        implicated_steps: vec![1],
    };
    let insight = "the best team starts with research";

    let mut script = Script::default();
    let mut say = |tag: &str, v: serde_json::Value| script.push_tagged(tag, fenced(v));
    say("init_team/p0/t0", team_wire(&x0));
    say("eval/p0/t0", json!({"explanation": analysis0.explanation, "steps": [2]}));
    say("flaw/p0/t0", json!({"flaws": [{"category": "Missing Role", "role": "Verifier", "explanation": "nobody checks"}]}));
    say("init_vel/p0/t0", json!({"adjustments": [{"flaw": 1, "ops": v0_ops}]}));
    say("pos/p0/t0", team_wire(&x1));
    say("eval/p0/t1", json!({"explanation": analysis1.explanation, "steps": [1]}));
    say("flaw/p0/t1", json!({"flaws": [{"category": "Missing Role", "role": "Planner", "explanation": "nobody plans"}]}));
    say("identify_fail/p0/t1", json!({"failed_adjustments": [{"flaw": 1, "failed_adjustment": null}]}));
    say("fail/p0/t1", json!({"adjustments": [{"flaw": 1, "ops": fail_ops}]}));
    say("glob/p0/t1", json!({"adjustments": [{"flaw": 1, "insights": insight, "quotes": ["Researcher"], "ops": glob_ops}]}));
    say("vel/p0/t1", json!({"adjustments": [{"flaw": 1, "ops": fail_ops}]}));
    say("pos/p0/t1", team_wire(&x2));

    let recorder = Arc::new(Recorder {
        inner: ScriptedProvider::new(script),
        calls: Mutex::new(Vec::new()),
    });
    let config = SwarmConfig {
        n_particles: 1,
        n_iterations: 1,
        temperatures: vec![0.5],
        master_seed: 3,
        ..SwarmConfig::default()
    };
    let prompts = Arc::new(PromptLibrary::builtin());
    let swarm = Swarm::new(
        config,
        synthetic::bundle(),
        Arc::new(Gateway::new(recorder.clone())),
        prompts.clone(),
    )
    .unwrap();
    let started = Instant::now();
    let report = swarm.run().unwrap();
    let elapsed = started.elapsed();

    // hand simulation
    let x0p = x0.clone().with_provenance("init_team p0 temperature 0.5");
    let x1p = x1.clone().with_provenance("pos p0 t0");
    let out0 = outcome(&["F4"]);
    let out1 = outcome(&["F1", "F4"]);
    let report0 = FlawReport::new(vec![flaw0.clone()], out0.clone());
    let report1 = FlawReport::new(vec![flaw1.clone()], out1.clone());
    let v0 = Velocity::new(vec![VelocityEntry::new(flaw0, v0_ops, TermOrigin::Init)]);
    let ledger = FailureLedger::none_for(std::slice::from_ref(&flaw1));
    let merge_input = MergeInput {
        flaws: vec![MergeItem {
            flaw: 1,
            identified_flaw: flaw1.clone(),
            failed_adjustment: None,
            recommended_adjustment: fail_ops.clone(),
            best_team_insights: Some(insight.into()),
            best_team_adjustment: glob_ops,
            past_best_setup_reflection: None,
            past_best_adjustment: Vec::new(),
        }],
    };
    let v1 = Velocity::new(vec![VelocityEntry::new(flaw1, fail_ops, TermOrigin::Merged)
        .with_failed_adjustment(None)
        .with_sources(vec![TermOrigin::FailureTerm])]);
    let render = |op, b: &[(&str, String)]| prompts.render(op, b).unwrap();
    let expected: Vec<(&str, String)> = vec![
        ("init_team/p0/t0", render(Operator::InitTeam, &[("task", task.clone())])),
        ("eval/p0/t0", render(Operator::Eval, &[("task", task.clone()), ("workflow", x0p.to_record()), ("evaluation", out0.to_record())])),
        ("flaw/p0/t0", render(Operator::Flaw, &[("feedback", analysis0.to_record()), ("current team", x0p.to_record())])),
        ("init_vel/p0/t0", render(Operator::InitVel, &[("current_team", x0p.to_record()), ("feedback", report0.to_record())])),
        ("pos/p0/t0", render(Operator::Pos, &[("roles", x0p.roles_text()), ("workflow", x0p.workflow_text()), ("task", task.clone()), ("plan", v0.to_record())])),
        ("eval/p0/t1", render(Operator::Eval, &[("task", task.clone()), ("workflow", x1p.to_record()), ("evaluation", out1.to_record())])),
        ("flaw/p0/t1", render(Operator::Flaw, &[("feedback", analysis1.to_record()), ("current team", x1p.to_record())])),
        ("identify_fail/p0/t1", render(Operator::IdentifyFail, &[("feedback", report1.to_record()), ("velocity", v0.to_record())])),
        ("fail/p0/t1", render(Operator::Fail, &[("team", x1p.to_record()), ("feedback", ledger.to_record())])),
        // personal best is x1 itself, so the personal term needs no call
        ("glob/p0/t1", render(Operator::Glob, &[("current_team", x1p.to_record()), ("task", task.clone()), ("feedback", report1.to_record()), ("g_best", x0p.to_record())])),
        ("vel/p0/t1", render(Operator::Vel, &[("team", x1p.to_record()), ("task", task.clone()), ("feedback", merge_input.to_record())])),
        ("pos/p0/t1", render(Operator::Pos, &[("roles", x1p.roles_text()), ("workflow", x1p.workflow_text()), ("task", task.clone()), ("plan", v1.to_record())])),
    ];

    let calls = recorder.calls.lock().unwrap().clone();
    TraceRun {
        calls,
        expected,
        report,
        best: x1p,
        elapsed,
    }
}
