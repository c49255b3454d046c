//! Executing a team on one task instance: each workflow step becomes a role
//! call whose prompt carries the outputs of the steps it references.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

use crate::gateway::{CallTag, CompletionRequest, Gateway, GatewayError, Profile};
use crate::model::{validate_position, PlanMode, Position};
use crate::record::Record;
use crate::transform::{
    wire, CallCtx, Issue, Operator, PromptLibrary, Settle, TransformError, Transformer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanProvenance {
    Deterministic,
    LlmCompiled,
}

/// One `team.call`: a role, the earlier calls whose responses it reads
/// (1-based), and the output it is asked for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCall {
    pub role: String,
    pub inputs: Vec<usize>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub calls: Vec<PlanCall>,
    pub provenance: PlanProvenance,
}

impl Record for ExecutionPlan {
    const KIND: &'static str = "execution_plan";
}

impl ExecutionPlan {
    /// Reasons the plan cannot run against `pos`.
    pub fn problems(&self, pos: &Position) -> Vec<String> {
        let mut out = Vec::new();
        if self.calls.is_empty() {
            out.push("the plan has no calls".to_string());
        }
        for (i, call) in self.calls.iter().enumerate() {
            let k = i + 1;
            if pos.agent(&call.role).is_none() {
                out.push(format!(
                    "call {k} uses role `{}`, which is not part of the team",
                    call.role
                ));
            }
            for &input in &call.inputs {
                if input == 0 || input >= k {
                    out.push(format!(
                        "call {k} reads call {input}, which does not precede it"
                    ));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub role: String,
    pub prompt: String,
    pub response: String,
    pub elapsed_ms: u64,
}

/// The message pool of one execution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub instance: String,
    pub records: Vec<StepRecord>,
    pub final_answer: String,
    /// Set when execution stopped early.
    pub error: Option<String>,
}

impl Record for Transcript {
    const KIND: &'static str = "transcript";
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("execution aborted at step {step}: {source}")]
    ExecutionAborted {
        step: usize,
        source: GatewayError,
        transcript: Box<Transcript>,
    },
    #[error("invalid execution plan: {0}")]
    InvalidPlan(String),
}

/// Maps workflow steps one to one onto calls.
pub fn compile_execution_plan(pos: &Position) -> ExecutionPlan {
    ExecutionPlan {
        calls: pos
            .workflow
            .iter()
            .map(|s| PlanCall {
                role: s.role.clone(),
                inputs: s.inputs.clone(),
                output: s.output.clone(),
            })
            .collect(),
        provenance: PlanProvenance::Deterministic,
    }
}

const FORWARD_EXAMPLE: &str = r#"{"calls": [
  {"role": "Researcher", "inputs": [], "output": "key facts"},
  {"role": "Writer", "inputs": [1], "output": "draft answer"},
  {"role": "Reviewer", "inputs": [1, 2], "output": "final answer"}
]}"#;

/// Asks the optimizer model to lay out the call sequence.
pub fn compile_llm_plan(
    transformer: &Transformer,
    pos: &Position,
    ctx: &CallCtx,
) -> Result<ExecutionPlan, TransformError> {
    let prompt = transformer.prompts().render(
        Operator::WriteForward,
        &[
            ("function description", transformer.task().to_string()),
            ("roles", pos.roles_text()),
            ("workflow", pos.workflow_text()),
            ("examples", FORWARD_EXAMPLE.to_string()),
        ],
    )?;
    transformer.exchange(Operator::WriteForward, ctx, prompt, |text| {
        let v = wire::extract_json(text)?;
        let items = wire::list(&v, &["calls", "plan"], "call list")?;
        let mut calls = Vec::new();
        for item in items {
            let obj = wire::as_object(item, "call")?;
            calls.push(PlanCall {
                role: wire::text(obj, &["role", "role name"], "call")?,
                inputs: wire::index_list(wire::get(obj, &["inputs"]), "inputs")?,
                output: wire::text(obj, &["output"], "call")?,
            });
        }
        let plan = ExecutionPlan {
            calls,
            provenance: PlanProvenance::LlmCompiled,
        };
        if let Some(call) = plan.calls.iter().find(|c| pos.agent(&c.role).is_none()) {
            return Err(Issue::Semantic(
                format!(
                    "role `{}` is not part of the team; call only the available roles",
                    call.role
                ),
                Settle::Fail(TransformError::UnknownRoleInPlan(call.role.clone())),
            ));
        }
        let problems = plan.problems(pos);
        if !problems.is_empty() {
            return Err(Issue::Semantic(problems.join("; "), Settle::Unparseable));
        }
        Ok(plan)
    })
}

/// Compiles a plan in the requested mode.
pub fn compile(
    transformer: &Transformer,
    pos: &Position,
    mode: PlanMode,
    ctx: &CallCtx,
) -> Result<ExecutionPlan, TransformError> {
    match mode {
        PlanMode::Deterministic => Ok(compile_execution_plan(pos)),
        PlanMode::LlmAssisted => compile_llm_plan(transformer, pos, ctx),
    }
}

/// Where an execution happens, for call tags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecCtx {
    pub particle: usize,
    pub iteration: usize,
    pub seed: u64,
}

/// Runs plans on the executor model.
pub struct Executor {
    gateway: Arc<Gateway>,
    prompts: Arc<PromptLibrary>,
    model: String,
    temperature: f64,
}

impl Executor {
    pub fn new(
        gateway: Arc<Gateway>,
        prompts: Arc<PromptLibrary>,
        model: impl Into<String>,
        temperature: f64,
    ) -> Self {
        Self {
            gateway,
            prompts,
            model: model.into(),
            temperature,
        }
    }

    pub fn execute_plan(
        &self,
        plan: &ExecutionPlan,
        pos: &Position,
        instance_id: &str,
        instance: &str,
        ctx: &ExecCtx,
    ) -> Result<Transcript, RuntimeError> {
        let problems = plan.problems(pos);
        if !problems.is_empty() {
            return Err(RuntimeError::InvalidPlan(problems.join("; ")));
        }
        let mut transcript = Transcript {
            instance: instance_id.to_string(),
            ..Transcript::default()
        };
        let tag = CallTag::at("exec", ctx.particle, ctx.iteration);
        for (i, call) in plan.calls.iter().enumerate() {
            let step = i + 1;
            let agent = pos.agent(&call.role).expect("plan roles checked");
            let information = call
                .inputs
                .iter()
                .map(|&k| transcript.records[k - 1].response.as_str())
                .collect::<Vec<_>>()
                .join("\n\n");
            let prompt = self
                .prompts
                .render(
                    Operator::Role,
                    &[
                        ("name", agent.name.clone()),
                        ("instance", instance.to_string()),
                        ("information", information),
                        ("responsibility", agent.responsibility.clone()),
                        ("policy", agent.policy.clone()),
                        ("output", call.output.clone()),
                    ],
                )
                .map_err(|e| RuntimeError::InvalidPlan(e.to_string()))?;
            let started = Instant::now();
            let result = self.gateway.complete(&CompletionRequest {
                prompt: prompt.clone(),
                temperature: self.temperature,
                model: self.model.clone(),
                tag: tag
                    .with_detail(format!("{instance_id}/s{step}"))
                    .to_string(),
                seed: ctx.seed,
                profile: Profile::Executor,
            });
            match result {
                Ok(response) => transcript.records.push(StepRecord {
                    step,
                    role: call.role.clone(),
                    prompt,
                    response,
                    elapsed_ms: started.elapsed().as_millis() as u64,
                }),
                Err(source) => {
                    transcript.error = Some(format!("step {step}: {source}"));
                    return Err(RuntimeError::ExecutionAborted {
                        step,
                        source,
                        transcript: Box::new(transcript),
                    });
                }
            }
        }
        transcript.final_answer = transcript
            .records
            .last()
            .map(|r| r.response.clone())
            .unwrap_or_default();
        Ok(transcript)
    }
}

/// Convenience: deterministic plan plus execution, after validation.
pub fn run_position(
    executor: &Executor,
    pos: &Position,
    instance_id: &str,
    instance: &str,
    ctx: &ExecCtx,
) -> Result<Transcript, RuntimeError> {
    let report = validate_position(pos);
    if !report.is_valid() {
        return Err(RuntimeError::InvalidPlan(report.messages().join("; ")));
    }
    executor.execute_plan(
        &compile_execution_plan(pos),
        pos,
        instance_id,
        instance,
        ctx,
    )
}
