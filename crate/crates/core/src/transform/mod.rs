//! The language-model operators of the search. Each renders its template,
//! completes it through the gateway and parses the answer into model types,
//! with a bounded repair loop on malformed or invalid answers.

mod apply;
mod prompts;
mod records;
pub mod wire;

pub use apply::{apply_velocity_deterministic, conformance_problems};
pub use prompts::{Operator, PromptError, PromptLibrary, PromptTemplate};
pub use records::{FailureLedger, LedgerEntry, MergeInput, MergeItem, ProblemAnalysis};

use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

use crate::gateway::{CallTag, CompletionRequest, Gateway, GatewayError, Profile};
use crate::model::{
    validate_position, AdjustmentOp, EvalOutcome, Flaw, FlawReport, Position, PositionUpdateMode,
    TermOrigin, Velocity, VelocityEntry,
};
use crate::record::Record;

/// Repair rounds allowed after a malformed answer.
pub const MAX_REPAIRS: u32 = 2;
/// Repair rounds allowed after a well-formed but invalid answer.
pub const MAX_SEMANTIC_REPAIRS: u32 = 1;

/// Where a call happens and how it samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallCtx {
    pub particle: usize,
    pub iteration: usize,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("{op}: no usable answer after repair ({reason})")]
    UnparseableAfterRepair {
        op: String,
        reason: String,
        attempts: Vec<String>,
    },
    #[error("unknown flaw category `{0}`")]
    UnknownCategory(String),
    #[error("proposed operation repeats a failed adjustment: {0}")]
    RepetitionDetected(String),
    #[error("the global best is undefined before the first swarm-wide evaluation")]
    GlobalBestUndefined,
    #[error("no merged adjustment for flaw: {0}")]
    FlawUnaddressed(String),
    #[error("execution plan calls role `{0}`, which is not part of the team")]
    UnknownRoleInPlan(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// What to do once an invalid answer has used up its repair rounds.
pub enum Settle<T> {
    Accept(T),
    Unparseable,
    Fail(TransformError),
}

pub enum Issue<T> {
    Malformed(String),
    Semantic(String, Settle<T>),
}

impl<T> From<String> for Issue<T> {
    fn from(s: String) -> Self {
        Issue::Malformed(s)
    }
}

pub struct Transformer {
    gateway: Arc<Gateway>,
    prompts: Arc<PromptLibrary>,
    model: String,
    task: String,
}

impl Transformer {
    pub fn new(
        gateway: Arc<Gateway>,
        prompts: Arc<PromptLibrary>,
        model: impl Into<String>,
        task: impl Into<String>,
    ) -> Self {
        Self {
            gateway,
            prompts,
            model: model.into(),
            task: task.into(),
        }
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    pub fn task(&self) -> &str {
        &self.task
    }

    fn call(&self, tag: &str, prompt: &str, ctx: &CallCtx) -> Result<String, TransformError> {
        Ok(self.gateway.complete(&CompletionRequest {
            prompt: prompt.to_string(),
            temperature: ctx.temperature,
            model: self.model.clone(),
            tag: tag.to_string(),
            seed: ctx.seed,
            profile: Profile::Optimizer,
        })?)
    }

    /// Completes `prompt` and parses the answer, issuing repair requests that
    /// quote the problem and the previous answer.
    pub fn exchange<T>(
        &self,
        op: Operator,
        ctx: &CallCtx,
        prompt: String,
        parse: impl Fn(&str) -> Result<T, Issue<T>>,
    ) -> Result<T, TransformError> {
        let tag = CallTag::at(op.name(), ctx.particle, ctx.iteration);
        let mut attempts = Vec::new();
        let mut text = self.call(&tag.to_string(), &prompt, ctx)?;
        let mut repairs = 0;
        let mut semantic_repairs = 0;
        loop {
            attempts.push(text.clone());
            let problem = match parse(&text) {
                Ok(value) => return Ok(value),
                Err(Issue::Malformed(problem)) => {
                    if repairs >= MAX_REPAIRS {
                        return Err(TransformError::UnparseableAfterRepair {
                            op: op.name().to_string(),
                            reason: problem,
                            attempts,
                        });
                    }
                    problem
                }
                Err(Issue::Semantic(problem, settle)) => {
                    if semantic_repairs >= MAX_SEMANTIC_REPAIRS || repairs >= MAX_REPAIRS {
                        return match settle {
                            Settle::Accept(value) => {
                                tracing::warn!(op = op.name(), tag = %tag, %problem, "accepting answer after repair");
                                Ok(value)
                            }
                            Settle::Unparseable => Err(TransformError::UnparseableAfterRepair {
                                op: op.name().to_string(),
                                reason: problem,
                                attempts,
                            }),
                            Settle::Fail(err) => Err(err),
                        };
                    }
                    semantic_repairs += 1;
                    problem
                }
            };
            repairs += 1;
            let request = self.prompts.render_repair(&prompt, &text, &problem);
            text = self.call(
                &tag.with_detail(format!("repair{repairs}")).to_string(),
                &request,
                ctx,
            )?;
        }
    }

    /// Samples an initial team for the task.
    pub fn init_team(&self, ctx: &CallCtx) -> Result<Position, TransformError> {
        let prompt = self
            .prompts
            .render(Operator::InitTeam, &[("task", self.task.clone())])?;
        self.exchange(Operator::InitTeam, ctx, prompt, |text| {
            let pos = wire::team(&wire::extract_json(text)?)?;
            let report = validate_position(&pos);
            if !report.is_valid() {
                return Err(Issue::Semantic(
                    violations_problem(&report.violations),
                    Settle::Unparseable,
                ));
            }
            Ok(pos.with_provenance(format!(
                "init_team p{} temperature {}",
                ctx.particle, ctx.temperature
            )))
        })
    }

    /// Traces evaluation errors to workflow steps. No call when there are no errors.
    pub fn evaluate_performance(
        &self,
        pos: &Position,
        outcome: &EvalOutcome,
        ctx: &CallCtx,
    ) -> Result<ProblemAnalysis, TransformError> {
        if outcome.errors.is_empty() {
            return Ok(ProblemAnalysis::default());
        }
        let prompt = self.prompts.render(
            Operator::Eval,
            &[
                ("task", self.task.clone()),
                ("workflow", pos.to_record()),
                ("evaluation", outcome.to_record()),
            ],
        )?;
        let n = pos.workflow.len();
        self.exchange(Operator::Eval, ctx, prompt, |text| {
            let v = wire::extract_json(text)?;
            let obj = wire::as_object(&v, "analysis")?;
            let explanation =
                wire::text(obj, &["explanation", "analysis", "root cause"], "analysis")?;
            if explanation.trim().is_empty() {
                return Err(Issue::Malformed("the explanation is empty".into()));
            }
            let mut steps = Vec::new();
            for s in wire::index_list(wire::get(obj, &["steps", "implicated steps"]), "steps")? {
                if !steps.contains(&s) {
                    steps.push(s);
                }
            }
            let (kept, dropped): (Vec<usize>, Vec<usize>) =
                steps.into_iter().partition(|s| (1..=n).contains(s));
            let analysis = ProblemAnalysis {
                explanation,
                implicated_steps: kept,
            };
            if dropped.is_empty() {
                Ok(analysis)
            } else {
                Err(Issue::Semantic(
                    format!("steps {dropped:?} do not exist; the workflow has steps 1 to {n}"),
                    Settle::Accept(analysis),
                ))
            }
        })
    }

    /// Classifies the analysed problems into the flaw taxonomy. No call for an
    /// empty analysis.
    pub fn identify_flaws(
        &self,
        pos: &Position,
        analysis: &ProblemAnalysis,
        outcome: &EvalOutcome,
        ctx: &CallCtx,
    ) -> Result<FlawReport, TransformError> {
        if analysis.is_empty() {
            return Ok(FlawReport::empty(outcome.clone()));
        }
        let prompt = self.prompts.render(
            Operator::Flaw,
            &[
                ("feedback", analysis.to_record()),
                ("current team", pos.to_record()),
            ],
        )?;
        self.exchange(Operator::Flaw, ctx, prompt, |text| {
            let items: Vec<serde_json::Value> = match wire::extract_json(text) {
                Ok(v) => wire::list(&v, &["flaws"], "flaw list")?.clone(),
                Err(e) => {
                    let lines = wire::prose_flaw_lines(text);
                    if lines.is_empty() {
                        return Err(Issue::Malformed(e));
                    }
                    lines
                        .into_iter()
                        .map(|l| serde_json::Value::String(l.to_string()))
                        .collect()
                }
            };
            let mut flaws: Vec<Flaw> = Vec::new();
            let mut problems = Vec::new();
            let mut unknown = None;
            for item in &items {
                match wire::flaw(item, pos) {
                    Ok(f) => {
                        if !flaws.contains(&f) {
                            flaws.push(f);
                        }
                    }
                    Err(wire::FlawIssue::Malformed(m)) => return Err(Issue::Malformed(m)),
                    Err(wire::FlawIssue::UnknownCategory(c)) => {
                        problems.push(format!(
                            "`{c}` is not a flaw category; use one of: {}",
                            crate::model::FlawCategory::ALL
                                .map(|c| c.label())
                                .join(", ")
                        ));
                        unknown.get_or_insert(c);
                    }
                    Err(wire::FlawIssue::Unresolved(r)) => problems.push(r),
                }
            }
            let report = FlawReport::new(flaws, outcome.clone());
            if let Some(c) = unknown {
                return Err(Issue::Semantic(
                    problems.join("; "),
                    Settle::Fail(TransformError::UnknownCategory(c)),
                ));
            }
            if !problems.is_empty() {
                return Err(Issue::Semantic(problems.join("; "), Settle::Accept(report)));
            }
            if report.is_empty() && !outcome.is_max() {
                return Err(Issue::Semantic(
                    "no flaws were listed although the evaluation reported errors".into(),
                    Settle::Accept(report),
                ));
            }
            Ok(report)
        })
    }

    /// First velocity of a particle, proposed from its initial flaws.
    pub fn init_velocity(
        &self,
        pos: &Position,
        flaws: &FlawReport,
        ctx: &CallCtx,
    ) -> Result<Velocity, TransformError> {
        if flaws.is_empty() {
            return Ok(Velocity::empty());
        }
        let prompt = self.prompts.render(
            Operator::InitVel,
            &[
                ("current_team", pos.to_record()),
                ("feedback", flaws.to_record()),
            ],
        )?;
        self.exchange(Operator::InitVel, ctx, prompt, |text| {
            let (raw, problems) = adjustments(text, flaws.len())?;
            let vel = Velocity::new(
                flaws
                    .flaws
                    .iter()
                    .enumerate()
                    .filter_map(|(i, f)| {
                        raw.get(&i)
                            .map(|a| VelocityEntry::new(f.clone(), a.ops.clone(), TermOrigin::Init))
                    })
                    .collect(),
            );
            settle_problems(problems, vel)
        })
    }

    /// Quotes, for each current flaw, the earlier adjustment that failed to fix
    /// it. No call when no current flaw recurs from the previous report.
    pub fn identify_failed_adjustments(
        &self,
        prev_velocity: &Velocity,
        prev_flaws: &FlawReport,
        new_flaws: &FlawReport,
        ctx: &CallCtx,
    ) -> Result<FailureLedger, TransformError> {
        let none = FailureLedger::none_for(&new_flaws.flaws);
        let recurring = new_flaws
            .flaws
            .iter()
            .any(|f| prev_flaws.flaws.iter().any(|p| p.category == f.category));
        if new_flaws.is_empty() || !prev_velocity.has_ops() || !recurring {
            return Ok(none);
        }
        let plan = prev_velocity.to_record();
        let prompt = self.prompts.render(
            Operator::IdentifyFail,
            &[
                ("feedback", new_flaws.to_record()),
                ("velocity", plan.clone()),
            ],
        )?;
        self.exchange(Operator::IdentifyFail, ctx, prompt, |text| {
            let v = wire::extract_json(text)?;
            let items = wire::list(
                &v,
                &["failed adjustments", "ledger", "entries"],
                "failed adjustment list",
            )?;
            let mut ledger = none.clone();
            let mut problems = Vec::new();
            for item in items {
                let obj = wire::as_object(item, "failed adjustment")?;
                let Some(i) = flaw_number(obj, ledger.entries.len(), &mut problems) else {
                    continue;
                };
                if let Some(quote) = wire::optional_text(obj, &["failed adjustment", "quote"]) {
                    let quote = strip_quote_marks(&quote);
                    if plan.contains(quote) {
                        ledger.entries[i].failed_adjustment = Some(quote.to_string());
                    } else {
                        problems.push(format!(
                            "the quote for flaw {} does not appear in the previous adjustment plan",
                            i + 1
                        ));
                    }
                }
            }
            settle_problems(problems, ledger)
        })
    }

    /// Failure-driven term: new operations for each flaw, never repeating a
    /// ledgered failed adjustment.
    pub fn failure_term(
        &self,
        pos: &Position,
        ledger: &FailureLedger,
        ctx: &CallCtx,
    ) -> Result<Velocity, TransformError> {
        if ledger.entries.is_empty() {
            return Ok(Velocity::empty());
        }
        let prompt = self.prompts.render(
            Operator::Fail,
            &[("team", pos.to_record()), ("feedback", ledger.to_record())],
        )?;
        self.exchange(Operator::Fail, ctx, prompt, |text| {
            let (raw, problems) = adjustments(text, ledger.entries.len())?;
            let vel = Velocity::new(
                ledger
                    .entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let ops = raw.get(&i).map(|a| a.ops.clone()).unwrap_or_default();
                        VelocityEntry::new(e.flaw.clone(), ops, TermOrigin::FailureTerm)
                            .with_failed_adjustment(e.failed_adjustment.clone())
                    })
                    .collect(),
            );
            if let Some(op) = vel.ops().find(|op| ledger.repeats(op)) {
                return Err(Issue::Semantic(
                    format!(
                        "operation {} repeats a failed adjustment; propose a different solution",
                        op.canonical()
                    ),
                    Settle::Fail(TransformError::RepetitionDetected(op.canonical())),
                ));
            }
            settle_problems(problems, vel)
        })
    }

    /// Personal-best term.
    pub fn personal_term(
        &self,
        pos: &Position,
        p_best: &Position,
        flaws: &FlawReport,
        ctx: &CallCtx,
    ) -> Result<Velocity, TransformError> {
        self.best_term(
            Operator::Pers,
            TermOrigin::PersonalTerm,
            pos,
            p_best,
            flaws,
            ctx,
        )
    }

    /// Global-best term; `g_best` is `None` until the initial sweep completes.
    pub fn global_term(
        &self,
        pos: &Position,
        g_best: Option<&Position>,
        flaws: &FlawReport,
        ctx: &CallCtx,
    ) -> Result<Velocity, TransformError> {
        let g_best = g_best.ok_or(TransformError::GlobalBestUndefined)?;
        self.best_term(
            Operator::Glob,
            TermOrigin::GlobalTerm,
            pos,
            g_best,
            flaws,
            ctx,
        )
    }

    fn best_term(
        &self,
        op: Operator,
        origin: TermOrigin,
        pos: &Position,
        best: &Position,
        flaws: &FlawReport,
        ctx: &CallCtx,
    ) -> Result<Velocity, TransformError> {
        if flaws.is_empty() {
            return Ok(Velocity::empty());
        }
        let empty_entries = || {
            Velocity::new(
                flaws
                    .flaws
                    .iter()
                    .map(|f| VelocityEntry::new(f.clone(), Vec::new(), origin))
                    .collect(),
            )
        };
        if best.same_structure(pos) {
            return Ok(empty_entries());
        }
        let best_slot = if op == Operator::Pers {
            "p_best"
        } else {
            "g_best"
        };
        let prompt = self.prompts.render(
            op,
            &[
                ("current_team", pos.to_record()),
                ("task", self.task.clone()),
                ("feedback", flaws.to_record()),
                (best_slot, best.to_record()),
            ],
        )?;
        self.exchange(op, ctx, prompt, |text| {
            let (raw, mut problems) = adjustments(text, flaws.len())?;
            let mut vel = empty_entries();
            for (i, entry) in vel.entries.iter_mut().enumerate() {
                let Some(a) = raw.get(&i) else { continue };
                let ungrounded: Vec<&String> = a
                    .quotes
                    .iter()
                    .filter(|q| !best.contains_quote(q))
                    .collect();
                if !ungrounded.is_empty() {
                    problems.push(format!(
                        "flaw {}: quoted text {:?} does not appear in the best team",
                        i + 1,
                        ungrounded
                    ));
                    continue;
                }
                if a.insight.is_none() {
                    if !a.ops.is_empty() {
                        problems.push(format!("flaw {}: operations given without insights", i + 1));
                    }
                    continue;
                }
                entry.insight = a.insight.clone();
                entry.ops = a.ops.clone();
            }
            settle_problems(problems, vel)
        })
    }

    /// Combines the three terms into one entry per flaw. No call unless some
    /// flaw has candidate operations from two or more terms.
    #[allow(clippy::too_many_arguments)]
    pub fn merge_velocity(
        &self,
        pos: &Position,
        flaws: &FlawReport,
        failure: &Velocity,
        personal: &Velocity,
        global: &Velocity,
        ledger: &FailureLedger,
        ctx: &CallCtx,
    ) -> Result<Velocity, TransformError> {
        if flaws.is_empty() {
            return Ok(Velocity::empty());
        }
        let terms = [
            (TermOrigin::FailureTerm, failure),
            (TermOrigin::PersonalTerm, personal),
            (TermOrigin::GlobalTerm, global),
        ];
        let candidates: Vec<Vec<(TermOrigin, Vec<AdjustmentOp>)>> = flaws
            .flaws
            .iter()
            .map(|f| candidates_for(f, &terms, ledger))
            .collect();
        if candidates.iter().all(|c| c.len() < 2) {
            return Ok(merge_deterministic(
                flaws, failure, personal, global, ledger,
            ));
        }
        let input = MergeInput {
            flaws: flaws
                .flaws
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let entry = |v: &Velocity| v.entry_for(f).cloned();
                    let (p, g) = (entry(personal), entry(global));
                    MergeItem {
                        flaw: i + 1,
                        identified_flaw: f.clone(),
                        failed_adjustment: ledger.quote_for(f).map(str::to_string),
                        recommended_adjustment: entry(failure).map(|e| e.ops).unwrap_or_default(),
                        best_team_insights: g.as_ref().and_then(|e| e.insight.clone()),
                        best_team_adjustment: g.map(|e| e.ops).unwrap_or_default(),
                        past_best_setup_reflection: p.as_ref().and_then(|e| e.insight.clone()),
                        past_best_adjustment: p.map(|e| e.ops).unwrap_or_default(),
                    }
                })
                .collect(),
        };
        let prompt = self.prompts.render(
            Operator::Vel,
            &[
                ("team", pos.to_record()),
                ("task", self.task.clone()),
                ("feedback", input.to_record()),
            ],
        )?;
        self.exchange(Operator::Vel, ctx, prompt, |text| {
            let (raw, mut problems) = adjustments(text, flaws.len())?;
            let mut entries = Vec::new();
            let mut missing = None;
            for (i, f) in flaws.flaws.iter().enumerate() {
                let Some(a) = raw.get(&i) else {
                    problems.push(format!("flaw {} has no adjustment", i + 1));
                    missing.get_or_insert_with(|| f.to_string());
                    continue;
                };
                let (repeats, ops): (Vec<AdjustmentOp>, Vec<AdjustmentOp>) =
                    a.ops.iter().cloned().partition(|op| ledger.repeats(op));
                for op in &repeats {
                    problems.push(format!(
                        "operation {} repeats a failed adjustment",
                        op.canonical()
                    ));
                }
                let sources = candidates[i]
                    .iter()
                    .filter(|(_, c)| ops.iter().any(|op| c.contains(op)))
                    .map(|(o, _)| *o)
                    .collect();
                entries.push(
                    VelocityEntry::new(f.clone(), ops, TermOrigin::Merged)
                        .with_failed_adjustment(ledger.quote_for(f).map(str::to_string))
                        .with_sources(sources),
                );
            }
            if let Some(flaw) = missing {
                return Err(Issue::Semantic(
                    problems.join("; "),
                    Settle::Fail(TransformError::FlawUnaddressed(flaw)),
                ));
            }
            settle_problems(problems, Velocity::new(entries))
        })
    }

    /// Moves `pos` by `vel`. The language-model rewrite is checked against the
    /// deterministic result and replaced by it when it does not conform.
    pub fn apply_velocity(
        &self,
        pos: &Position,
        vel: &Velocity,
        mode: PositionUpdateMode,
        ctx: &CallCtx,
    ) -> Result<Position, TransformError> {
        if !vel.has_ops() {
            return Ok(pos.clone());
        }
        let oracle = apply_velocity_deterministic(pos, vel);
        if mode == PositionUpdateMode::Deterministic {
            return Ok(oracle);
        }
        let prompt = self.prompts.render(
            Operator::Pos,
            &[
                ("roles", pos.roles_text()),
                ("workflow", pos.workflow_text()),
                ("task", self.task.clone()),
                ("plan", vel.to_record()),
            ],
        )?;
        let result = self.exchange(Operator::Pos, ctx, prompt, |text| {
            let candidate = wire::team(&wire::extract_json(text)?)?;
            let problems = conformance_problems(pos, &oracle, &candidate);
            if !problems.is_empty() {
                return Err(Issue::Semantic(
                    problems.join("; "),
                    Settle::Accept(oracle.clone()),
                ));
            }
            Ok(candidate.with_provenance(format!("pos p{} t{}", ctx.particle, ctx.iteration)))
        });
        match result {
            Err(TransformError::UnparseableAfterRepair { reason, .. }) => {
                tracing::warn!(particle = ctx.particle, iteration = ctx.iteration, %reason, "position update fell back to deterministic application");
                Ok(oracle)
            }
            other => other,
        }
    }
}

/// Deterministic merge: per flaw, the first non-empty candidate in the order
/// failure, personal, global, minus any operation repeating a failed
/// adjustment.
pub fn merge_deterministic(
    flaws: &FlawReport,
    failure: &Velocity,
    personal: &Velocity,
    global: &Velocity,
    ledger: &FailureLedger,
) -> Velocity {
    let terms = [
        (TermOrigin::FailureTerm, failure),
        (TermOrigin::PersonalTerm, personal),
        (TermOrigin::GlobalTerm, global),
    ];
    Velocity::new(
        flaws
            .flaws
            .iter()
            .map(|f| {
                let (ops, sources) = match candidates_for(f, &terms, ledger).into_iter().next() {
                    Some((origin, ops)) => (ops, vec![origin]),
                    None => (Vec::new(), Vec::new()),
                };
                VelocityEntry::new(f.clone(), ops, TermOrigin::Merged)
                    .with_failed_adjustment(ledger.quote_for(f).map(str::to_string))
                    .with_sources(sources)
            })
            .collect(),
    )
}

fn candidates_for(
    flaw: &Flaw,
    terms: &[(TermOrigin, &Velocity)],
    ledger: &FailureLedger,
) -> Vec<(TermOrigin, Vec<AdjustmentOp>)> {
    terms
        .iter()
        .filter_map(|(origin, v)| {
            let ops: Vec<AdjustmentOp> = v
                .entry_for(flaw)?
                .ops
                .iter()
                .filter(|op| !ledger.repeats(op))
                .cloned()
                .collect();
            (!ops.is_empty()).then_some((*origin, ops))
        })
        .collect()
}

fn violations_problem(violations: &[crate::model::Violation]) -> String {
    format!(
        "the team is not valid: {}",
        violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    )
}

fn settle_problems<T>(problems: Vec<String>, value: T) -> Result<T, Issue<T>> {
    if problems.is_empty() {
        Ok(value)
    } else {
        Err(Issue::Semantic(problems.join("; "), Settle::Accept(value)))
    }
}

fn strip_quote_marks(s: &str) -> &str {
    let t = s.trim();
    for (a, b) in [('"', '"'), ('\'', '\''), ('`', '`'), ('“', '”')] {
        if t.len() >= 2 && t.starts_with(a) && t.ends_with(b) {
            return t[a.len_utf8()..t.len() - b.len_utf8()].trim();
        }
    }
    t
}

/// 0-based flaw position from a 1-based `flaw` field, recording a problem
/// when it is missing or out of range.
fn flaw_number(
    obj: &serde_json::Map<String, serde_json::Value>,
    n: usize,
    problems: &mut Vec<String>,
) -> Option<usize> {
    match wire::get(obj, &["flaw", "flaw index", "flaw number"]).and_then(wire::index) {
        Some(k) if (1..=n).contains(&k) => Some(k - 1),
        Some(k) => {
            problems.push(format!(
                "flaw {k} does not exist; flaws are numbered 1 to {n}"
            ));
            None
        }
        None => {
            problems.push("an entry has no \"flaw\" number".into());
            None
        }
    }
}

struct RawAdjustment {
    ops: Vec<AdjustmentOp>,
    insight: Option<String>,
    quotes: Vec<String>,
}

/// Parses `{"adjustments": [...]}` into per-flaw entries (keyed by 0-based
/// flaw position). Unusable items are dropped and reported as problems.
fn adjustments(
    text: &str,
    n_flaws: usize,
) -> Result<(BTreeMap<usize, RawAdjustment>, Vec<String>), String> {
    let v = wire::extract_json(text)?;
    let items = wire::list(&v, &["adjustments", "plan", "entries"], "adjustment plan")?;
    let mut out: BTreeMap<usize, RawAdjustment> = BTreeMap::new();
    let mut problems = Vec::new();
    for item in items {
        let obj = wire::as_object(item, "adjustment")?;
        let Some(i) = flaw_number(obj, n_flaws, &mut problems) else {
            continue;
        };
        let mut ops = Vec::new();
        match wire::get(obj, &["ops", "operations", "proposed adjustment"]) {
            Some(serde_json::Value::Array(list)) => {
                for raw in list {
                    match wire::op(raw) {
                        Ok(op) => match op.shape_problems().into_iter().next() {
                            None => ops.push(op),
                            Some(p) => problems.push(format!("flaw {}: {p}", i + 1)),
                        },
                        Err(e) => problems.push(format!("flaw {}: {e}", i + 1)),
                    }
                }
            }
            None | Some(serde_json::Value::Null) | Some(serde_json::Value::String(_)) => {}
            Some(other) => problems.push(format!(
                "flaw {}: \"ops\" must be a list, got {other}",
                i + 1
            )),
        }
        let quotes = match wire::get(obj, &["quotes"]) {
            Some(serde_json::Value::Array(qs)) => qs
                .iter()
                .filter_map(|q| q.as_str().map(str::to_string))
                .collect(),
            _ => Vec::new(),
        };
        let insight = wire::optional_text(obj, &["insights", "insight", "comparative insights"]);
        let slot = out.entry(i).or_insert(RawAdjustment {
            ops: Vec::new(),
            insight: None,
            quotes: Vec::new(),
        });
        slot.ops.extend(ops);
        slot.quotes.extend(quotes);
        if slot.insight.is_none() {
            slot.insight = insight;
        }
    }
    Ok((out, problems))
}
