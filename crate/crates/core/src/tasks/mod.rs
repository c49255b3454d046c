//! Tasks: a description, train/eval instances and an objective producing a
//! fitness in [0, 1] plus an error set.

pub mod arithmetic;
pub mod manifest;
pub mod planner;
pub mod synthetic;

pub use manifest::{load_manifest, ManifestError, ScorerFactory, ScorerRegistry, TaskManifest};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::model::{validate_position, EvalOutcome, Position};
use crate::runtime::{
    compile_execution_plan, ExecCtx, ExecutionPlan, Executor, RuntimeError, Transcript,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub reference: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

/// Objective for one instance. Must be total: any answer text yields a score.
pub trait Scorer: Send + Sync {
    fn id(&self) -> &str;

    /// False for scorers that judge the team itself rather than its answer;
    /// those are evaluated without executing anything.
    fn needs_execution(&self) -> bool {
        true
    }

    /// Score in [0, 1] and an error text when the score is below 1.
    fn score(&self, instance: &Instance, answer: &str, pos: &Position) -> (f64, Option<String>);
}

#[derive(Clone)]
pub struct TaskBundle {
    pub id: String,
    pub description: String,
    pub train: Vec<Instance>,
    pub eval: Vec<Instance>,
    pub scorer: Arc<dyn Scorer>,
}

impl fmt::Debug for TaskBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskBundle")
            .field("id", &self.id)
            .field("train", &self.train.len())
            .field("eval", &self.eval.len())
            .field("scorer", &self.scorer.id())
            .finish()
    }
}

impl TaskBundle {
    pub fn instances(&self, split: Split) -> &[Instance] {
        match split {
            Split::Train => &self.train,
            Split::Eval => &self.eval,
        }
    }

    /// Duplicate instance ids, if any.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for list in [&self.train, &self.eval] {
            let mut seen = std::collections::HashSet::new();
            for i in list {
                if !seen.insert(&i.id) {
                    out.push(format!("duplicate instance id `{}`", i.id));
                }
            }
        }
        if self.train.is_empty() {
            out.push("the train split is empty".into());
        }
        out
    }
}

/// Fitness plus the transcripts that produced it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outcome: EvalOutcome,
    pub transcripts: Vec<Transcript>,
}

pub const ABORTED: &str = "execution aborted";

/// Scores `pos` on a split. Instances run concurrently; results are kept in
/// instance order. An aborted execution scores 0 for its instance only.
/// Without `plan`, the workflow is interpreted step by step.
pub fn evaluate(
    pos: &Position,
    bundle: &TaskBundle,
    split: Split,
    executor: Option<&Executor>,
    plan: Option<&ExecutionPlan>,
    ctx: &ExecCtx,
) -> Evaluation {
    let instances = bundle.instances(split);
    let report = validate_position(pos);
    if !report.is_valid() {
        let error = format!("invalid team: {}", report.messages().join("; "));
        return Evaluation {
            outcome: EvalOutcome::from_scores(
                instances
                    .iter()
                    .map(|i| (i.id.clone(), 0.0, Some(error.clone())))
                    .collect(),
            ),
            transcripts: Vec::new(),
        };
    }
    let executor = executor.filter(|_| bundle.scorer.needs_execution());
    let results: Vec<(f64, Option<String>, Option<Transcript>)> = match executor {
        None => instances
            .iter()
            .map(|inst| {
                let (s, e) = bundle.scorer.score(inst, "", pos);
                (s, e, None)
            })
            .collect(),
        Some(executor) => {
            let compiled = plan.is_none().then(|| compile_execution_plan(pos));
            let plan = plan.or(compiled.as_ref()).expect("plan present");
            std::thread::scope(|scope| {
                let handles: Vec<_> = instances
                    .iter()
                    .map(|inst| {
                        scope.spawn(move || run_instance(executor, plan, pos, bundle, inst, ctx))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("instance worker panicked"))
                    .collect()
            })
        }
    };
    let mut scores = Vec::with_capacity(results.len());
    let mut transcripts = Vec::new();
    for (inst, (score, error, transcript)) in instances.iter().zip(results) {
        let error = if score >= 1.0 {
            None
        } else {
            Some(error.unwrap_or_else(|| format!("score {score:.3} below 1")))
        };
        scores.push((inst.id.clone(), score, error));
        transcripts.extend(transcript);
    }
    Evaluation {
        outcome: EvalOutcome::from_scores(scores),
        transcripts,
    }
}

fn run_instance(
    executor: &Executor,
    plan: &ExecutionPlan,
    pos: &Position,
    bundle: &TaskBundle,
    inst: &Instance,
    ctx: &ExecCtx,
) -> (f64, Option<String>, Option<Transcript>) {
    match executor.execute_plan(plan, pos, &inst.id, &inst.text, ctx) {
        Ok(t) => {
            let (s, e) = bundle.scorer.score(inst, &t.final_answer, pos);
            (s, e, Some(t))
        }
        Err(RuntimeError::ExecutionAborted { transcript, .. }) => {
            (0.0, Some(ABORTED.to_string()), Some(*transcript))
        }
        Err(e) => (0.0, Some(e.to_string()), None),
    }
}

/// Ids of the built-in tasks.
pub const BUILTIN_TASKS: [&str; 3] = ["synthetic-flaws", "constraint-planner", "arithmetic"];

pub fn builtin(id: &str) -> Option<TaskBundle> {
    match id {
        "synthetic-flaws" => Some(builtin_synthetic_flaw_task()),
        "constraint-planner" => Some(builtin_constraint_planner_task()),
        "arithmetic" => Some(builtin_arithmetic_task()),
        _ => None,
    }
}

pub fn builtin_synthetic_flaw_task() -> TaskBundle {
    synthetic::bundle()
}

pub fn builtin_constraint_planner_task() -> TaskBundle {
    planner::bundle()
}

pub fn builtin_arithmetic_task() -> TaskBundle {
    arithmetic::bundle()
}
