//! The swarm controller: initialization sweep, per-particle pipelines between
//! iteration barriers, best bookkeeping, checkpoints and the run directory.

mod rundir;
mod state;

pub use rundir::{canonical, RunDir, RunManifest, RunStatus, Trajectory};
pub use state::{
    checkpoint_text, parse_checkpoint, read_checkpoint, write_checkpoint, GlobalBest, SwarmState,
    TrajectoryPoint,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use thiserror::Error;

use crate::gateway::{Gateway, UsageLedger, UsageTotals};
use crate::model::{
    Best, EvalOutcome, FlawReport, Particle, PlanMode, Position, SwarmConfig, Velocity,
};
use crate::record::Record;
use crate::runtime::{compile_llm_plan, ExecCtx, Executor, Transcript};
use crate::seed;
use crate::tasks::{self, Split, TaskBundle};
use crate::transform::{
    merge_deterministic, CallCtx, FailureLedger, ProblemAnalysis, PromptLibrary, TransformError,
    Transformer,
};

/// Sampling temperature of executor calls.
pub const EXECUTOR_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("run aborted at iteration {iteration}, particle {particle}: {reason}")]
    RunAborted {
        iteration: usize,
        particle: usize,
        reason: String,
        checkpoint: Option<PathBuf>,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SwarmError {
    fn from(e: std::io::Error) -> Self {
        SwarmError::Io(e.to_string())
    }
}

/// One operator invocation inside a particle pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub iteration: usize,
    pub particle: usize,
    pub op: String,
}

/// Everything one particle did in one iteration (or in the initial sweep,
/// `iteration = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleStep {
    pub particle: usize,
    pub iteration: usize,
    pub temperature: f64,
    pub position: Position,
    pub outcome: EvalOutcome,
    pub analysis: ProblemAnalysis,
    pub flaws: FlawReport,
    pub personal_best_improved: bool,
    pub ledger: Option<FailureLedger>,
    /// Inclusion draws for the failure, personal and global terms.
    pub included: [bool; 3],
    pub failure: Option<Velocity>,
    pub personal: Option<Velocity>,
    pub global: Option<Velocity>,
    pub velocity: Velocity,
    pub next_position: Position,
    pub notes: Vec<String>,
}

impl Record for ParticleStep {
    const KIND: &'static str = "particle_step";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub global_best: GlobalBest,
    pub trajectory: Vec<TrajectoryPoint>,
    pub iterations_run: usize,
    pub stopped_early: bool,
    /// Degradations: operators that failed and were replaced by a fallback.
    pub notes: Vec<String>,
    pub usage: UsageTotals,
    pub trace: Vec<TraceEvent>,
}

impl Record for RunReport {
    const KIND: &'static str = "run_report";
}

impl RunReport {
    pub fn fitness(&self) -> f64 {
        self.global_best.best.fitness
    }

    pub fn global_best_trajectory(&self) -> Vec<f64> {
        self.trajectory.iter().map(|p| p.global_best).collect()
    }
}

/// Replaces the incumbent only on strictly greater fitness. Candidates are
/// visited in the given order, so with ascending particle ids a tie among new
/// bests goes to the lowest id.
pub fn update_global_best(
    incumbent: Option<GlobalBest>,
    candidates: impl IntoIterator<Item = (usize, Best)>,
) -> Option<GlobalBest> {
    let mut g = incumbent;
    for (particle, best) in candidates {
        if g.as_ref().is_none_or(|cur| best.fitness > cur.best.fitness) {
            g = Some(GlobalBest { best, particle });
        }
    }
    g
}

fn add_totals(a: &UsageTotals, b: &UsageTotals) -> UsageTotals {
    UsageTotals {
        calls: a.calls + b.calls,
        cached_calls: a.cached_calls + b.cached_calls,
        prompt_units: a.prompt_units + b.prompt_units,
        completion_units: a.completion_units + b.completion_units,
        optimizer_calls: a.optimizer_calls + b.optimizer_calls,
        executor_calls: a.executor_calls + b.executor_calls,
    }
}

struct PipelineOut {
    particle: Particle,
    step: ParticleStep,
    transcripts: Vec<Transcript>,
    trace: Vec<TraceEvent>,
}

/// Per-particle, per-iteration call context.
struct Pipe<'a> {
    swarm: &'a Swarm,
    particle: usize,
    iteration: usize,
    temperature: f64,
    trace: Vec<TraceEvent>,
    notes: Vec<String>,
}

impl Pipe<'_> {
    fn ctx(&self, label: &str, temperature: Option<f64>) -> CallCtx {
        CallCtx {
            particle: self.particle,
            iteration: self.iteration,
            temperature: temperature.unwrap_or(self.temperature),
            seed: seed::derive(self.swarm.config.master_seed, self.particle, self.iteration, label),
        }
    }

    fn mark(&mut self, op: &str) {
        self.trace.push(TraceEvent {
            iteration: self.iteration,
            particle: self.particle,
            op: op.to_string(),
        });
    }

    fn abort(&self, reason: String) -> SwarmError {
        SwarmError::RunAborted {
            iteration: self.iteration,
            particle: self.particle,
            reason,
            checkpoint: None,
        }
    }

    /// Provider and template failures end the run; anything else degrades to
    /// `fallback` and is noted.
    fn recover<T>(
        &mut self,
        op: &str,
        result: Result<T, TransformError>,
        fallback: impl FnOnce() -> T,
    ) -> Result<T, SwarmError> {
        match result {
            Ok(v) => Ok(v),
            Err(e @ (TransformError::Gateway(_) | TransformError::Prompt(_))) => {
                Err(self.abort(format!("{op}: {e}")))
            }
            Err(e) => {
                tracing::warn!(particle = self.particle, iteration = self.iteration, op, error = %e, "operator fell back");
                self.notes.push(format!("t{} p{} {op}: {e}", self.iteration, self.particle));
                Ok(fallback())
            }
        }
    }

    fn evaluate(&mut self, pos: &Position) -> Result<tasks::Evaluation, SwarmError> {
        let s = self.swarm;
        self.mark("evaluate");
        let needs_execution = s.bundle.scorer.needs_execution();
        let plan = if needs_execution && s.config.plan_mode == PlanMode::LlmAssisted {
            self.mark("write_forward");
            let ctx = self.ctx("write_forward", None);
            let r = compile_llm_plan(&s.transformer, pos, &ctx).map(Some);
            self.recover("write_forward", r, || None)?
        } else {
            None
        };
        let ectx = ExecCtx {
            particle: self.particle,
            iteration: self.iteration,
            seed: seed::derive(s.config.master_seed, self.particle, self.iteration, "exec"),
        };
        Ok(tasks::evaluate(pos, &s.bundle, Split::Train, Some(&s.executor), plan.as_ref(), &ectx))
    }

    /// Evaluation, error analysis and flaw identification of `pos`.
    fn diagnose(
        &mut self,
        pos: &Position,
    ) -> Result<(tasks::Evaluation, ProblemAnalysis, FlawReport), SwarmError> {
        let t = &self.swarm.transformer;
        let evaluation = self.evaluate(pos)?;
        let outcome = evaluation.outcome.clone();
        self.mark("eval");
        let r = t.evaluate_performance(pos, &outcome, &self.ctx("eval", None));
        let analysis = self.recover("eval", r, ProblemAnalysis::default)?;
        self.mark("flaw");
        let r = t.identify_flaws(pos, &analysis, &outcome, &self.ctx("flaw", None));
        let flaws = self.recover("flaw", r, || FlawReport::empty(outcome.clone()))?;
        Ok((evaluation, analysis, flaws))
    }

    fn apply(&mut self, pos: &Position, vel: &Velocity) -> Result<Position, SwarmError> {
        self.mark("pos");
        let r = self.swarm.transformer.apply_velocity(
            pos,
            vel,
            self.swarm.config.position_update,
            &self.ctx("pos", None),
        );
        self.recover("pos", r, || crate::transform::apply_velocity_deterministic(pos, vel))
    }

    fn filter(&self, vel: Velocity) -> Velocity {
        let c = &self.swarm.config;
        if c.role_ops && c.workflow_ops {
            vel
        } else {
            vel.filtered(c.role_ops, c.workflow_ops)
        }
    }

    fn finish(self, particle: Particle, step: ParticleStep, transcripts: Vec<Transcript>) -> PipelineOut {
        let mut step = step;
        step.notes = self.notes;
        PipelineOut {
            particle,
            step,
            transcripts,
            trace: self.trace,
        }
    }
}

pub struct Swarm {
    config: SwarmConfig,
    bundle: TaskBundle,
    gateway: Arc<Gateway>,
    transformer: Transformer,
    executor: Executor,
    temperatures: Vec<f64>,
    run_dir: Option<RunDir>,
    /// Usage recorded before this process (restored from a checkpoint).
    usage_base: Mutex<(UsageTotals, UsageLedger)>,
}

impl Swarm {
    pub fn new(
        config: SwarmConfig,
        bundle: TaskBundle,
        gateway: Arc<Gateway>,
        prompts: Arc<PromptLibrary>,
    ) -> Result<Self, SwarmError> {
        let mut problems = config.problems();
        problems.extend(bundle.problems());
        if !problems.is_empty() {
            return Err(SwarmError::InvalidConfig(problems));
        }
        let transformer = Transformer::new(
            gateway.clone(),
            prompts.clone(),
            config.optimizer_model.clone(),
            bundle.description.clone(),
        );
        let executor = Executor::new(
            gateway.clone(),
            prompts,
            config.executor_model.clone(),
            EXECUTOR_TEMPERATURE,
        );
        Ok(Self {
            temperatures: config.resolved_temperatures(),
            config,
            bundle,
            gateway,
            transformer,
            executor,
            run_dir: None,
            usage_base: Mutex::new(Default::default()),
        })
    }

    /// Persist records, checkpoints and reports under `dir`.
    pub fn with_run_dir(mut self, dir: RunDir) -> Self {
        self.run_dir = Some(dir);
        self
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.config
    }

    pub fn bundle(&self) -> &TaskBundle {
        &self.bundle
    }

    pub fn run_dir(&self) -> Option<&RunDir> {
        self.run_dir.as_ref()
    }

    fn usage_totals(&self) -> UsageTotals {
        let base = self.usage_base.lock().expect("usage lock");
        add_totals(&base.0, &self.gateway.ledger().totals)
    }

    fn usage_ledger(&self) -> UsageLedger {
        let mut ledger = self.usage_base.lock().expect("usage lock").1.clone();
        for e in self.gateway.ledger().entries {
            ledger.push(e);
        }
        ledger
    }

    /// Runs `job(i)` for every particle on the configured number of workers;
    /// results come back in particle order.
    fn parallel<T: Send>(
        &self,
        job: impl Fn(usize) -> Result<T, SwarmError> + Sync,
    ) -> Result<Vec<T>, SwarmError> {
        let n = self.config.n_particles;
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<T, SwarmError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..self.config.workers().min(n) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let r = job(i);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every particle ran"))
            .collect()
    }

    fn pipe(&self, particle: usize, iteration: usize) -> Pipe<'_> {
        Pipe {
            swarm: self,
            particle,
            iteration,
            temperature: self.temperatures[particle],
            trace: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Initial sweep for one particle: sample x0, evaluate, diagnose, propose
    /// the first velocity, set the personal best to x0 and move to x1.
    fn init_particle(&self, i: usize) -> Result<PipelineOut, SwarmError> {
        let mut p = self.pipe(i, 0);
        p.mark("init_team");
        let x0 = match self.transformer.init_team(&p.ctx("init_team", None)) {
            Ok(x) => x,
            Err(e) => return Err(p.abort(format!("init_team: {e}"))),
        };
        let (evaluation, analysis, flaws) = p.diagnose(&x0)?;
        p.mark("init_vel");
        let r = self.transformer.init_velocity(&x0, &flaws, &p.ctx("init_vel", None));
        let v0 = p.recover("init_vel", r, Velocity::empty)?;
        let v0 = p.filter(v0);
        let x1 = p.apply(&x0, &v0)?;
        let fitness = evaluation.outcome.fitness;
        let particle = Particle {
            id: i,
            position: x1.clone(),
            velocity: Some(v0.clone()),
            personal_best: Best {
                position: x0.clone(),
                fitness,
            },
            fitness_history: vec![fitness],
            flaw_history: vec![flaws.clone()],
            velocity_history: vec![v0.clone()],
            temperature: p.temperature,
            rng_seed: seed::derive(self.config.master_seed, i, 0, "particle"),
        };
        let step = ParticleStep {
            particle: i,
            iteration: 0,
            temperature: p.temperature,
            position: x0,
            outcome: evaluation.outcome,
            analysis,
            flaws,
            personal_best_improved: true,
            ledger: None,
            included: [false; 3],
            failure: None,
            personal: None,
            global: None,
            velocity: v0,
            next_position: x1,
            notes: Vec::new(),
        };
        Ok(p.finish(particle, step, evaluation.transcripts))
    }

    /// One main-loop iteration for one particle, against the committed `g`.
    fn iterate_particle(
        &self,
        mut particle: Particle,
        iteration: usize,
        g: &Position,
    ) -> Result<PipelineOut, SwarmError> {
        let i = particle.id;
        let mut p = self.pipe(i, iteration);
        let tc = self.config.term_controls;
        let x = particle.position.clone();
        let (evaluation, analysis, flaws) = p.diagnose(&x)?;
        let fitness = evaluation.outcome.fitness;
        let improved = particle.update_personal_best(fitness, &x);

        let draw = |label: &str, prob: f64| {
            seed::rng(seed::derive(self.config.master_seed, i, iteration, label)).gen_bool(prob.clamp(0.0, 1.0))
        };
        let included = [
            draw("include-failure", tc.failure.inclusion),
            draw("include-personal", tc.personal.inclusion),
            draw("include-global", tc.global.inclusion),
        ];

        let none_ledger = FailureLedger::none_for(&flaws.flaws);
        let ledger = if included[0] {
            let prev_vel = particle.velocity.clone().unwrap_or_else(Velocity::empty);
            let prev_flaws = particle
                .last_flaws()
                .cloned()
                .unwrap_or_else(|| FlawReport::empty(flaws.source_fitness.clone()));
            p.mark("identify_fail");
            let r = self.transformer.identify_failed_adjustments(
                &prev_vel,
                &prev_flaws,
                &flaws,
                &p.ctx("identify_fail", None),
            );
            Some(p.recover("identify_fail", r, || none_ledger.clone())?)
        } else {
            None
        };
        let ledger_ref = ledger.as_ref().unwrap_or(&none_ledger);

        let failure = if included[0] {
            p.mark("fail");
            let r = self
                .transformer
                .failure_term(&x, ledger_ref, &p.ctx("fail", tc.failure.temperature));
            Some(p.recover("fail", r, Velocity::empty)?)
        } else {
            None
        };
        let personal = if included[1] {
            p.mark("pers");
            let r = self.transformer.personal_term(
                &x,
                &particle.personal_best.position,
                &flaws,
                &p.ctx("pers", tc.personal.temperature),
            );
            Some(p.recover("pers", r, Velocity::empty)?)
        } else {
            None
        };
        let global = if included[2] {
            p.mark("glob");
            let r = self
                .transformer
                .global_term(&x, Some(g), &flaws, &p.ctx("glob", tc.global.temperature));
            Some(p.recover("glob", r, Velocity::empty)?)
        } else {
            None
        };

        let empty = Velocity::empty();
        let (f, pe, gl) = (
            failure.as_ref().unwrap_or(&empty),
            personal.as_ref().unwrap_or(&empty),
            global.as_ref().unwrap_or(&empty),
        );
        p.mark("vel");
        let r = self
            .transformer
            .merge_velocity(&x, &flaws, f, pe, gl, ledger_ref, &p.ctx("vel", None));
        let merged = p.recover("vel", r, || merge_deterministic(&flaws, f, pe, gl, ledger_ref))?;
        let velocity = p.filter(merged);
        let next = p.apply(&x, &velocity)?;

        particle.fitness_history.push(fitness);
        particle.flaw_history.push(flaws.clone());
        particle.velocity_history.push(velocity.clone());
        particle.velocity = Some(velocity.clone());
        particle.position = next.clone();

        let step = ParticleStep {
            particle: i,
            iteration,
            temperature: p.temperature,
            position: x,
            outcome: evaluation.outcome,
            analysis,
            flaws,
            personal_best_improved: improved,
            ledger,
            included,
            failure,
            personal,
            global,
            velocity,
            next_position: next,
            notes: Vec::new(),
        };
        Ok(p.finish(particle, step, evaluation.transcripts))
    }

    fn trajectory_point(
        &self,
        iteration: usize,
        previous: Option<&GlobalBest>,
        g: &GlobalBest,
        particles: &[Particle],
    ) -> TrajectoryPoint {
        let improved = previous.is_none_or(|prev| g.best.fitness > prev.best.fitness);
        let cause = if !improved {
            Vec::new()
        } else if iteration == 0 {
            vec!["initial team".to_string()]
        } else {
            particles[g.particle]
                .velocity_history
                .get(iteration - 1)
                .map(Velocity::summaries)
                .unwrap_or_default()
        };
        TrajectoryPoint {
            iteration,
            global_best: g.best.fitness,
            particle: g.particle,
            improved,
            cause,
            personal_bests: particles.iter().map(|p| p.personal_best.fitness).collect(),
            fitness: particles
                .iter()
                .map(|p| p.fitness_history.get(iteration).copied().unwrap_or(f64::NAN))
                .collect(),
        }
    }

    /// Commits pipeline results: persists per-particle records, updates the
    /// global best and writes the checkpoint.
    fn barrier(
        &self,
        iteration: usize,
        previous: Option<GlobalBest>,
        trajectory: Vec<TrajectoryPoint>,
        outs: Vec<PipelineOut>,
        trace: &mut Vec<TraceEvent>,
        notes: &mut Vec<String>,
    ) -> Result<SwarmState, SwarmError> {
        let mut particles = Vec::with_capacity(outs.len());
        for out in outs {
            if let Some(dir) = &self.run_dir {
                dir.write_step(&out.step)?;
                dir.write_transcripts(iteration, out.particle.id, &out.transcripts)?;
                dir.append_trace(&out.trace)?;
            }
            trace.extend(out.trace);
            notes.extend(out.step.notes);
            particles.push(out.particle);
        }
        let g = update_global_best(
            previous.clone(),
            particles.iter().map(|p| (p.id, p.personal_best.clone())),
        )
        .expect("at least one particle");
        let mut trajectory = trajectory;
        trajectory.push(self.trajectory_point(iteration, previous.as_ref(), &g, &particles));
        let state = SwarmState {
            iteration,
            particles,
            global_best: Some(g),
            trajectory,
            master_seed: self.config.master_seed,
            usage: self.usage_totals(),
        };
        if let Some(dir) = &self.run_dir {
            dir.write_checkpoint(&state)?;
            dir.write_usage(&self.usage_ledger())?;
        }
        Ok(state)
    }

    fn with_checkpoint(&self, err: SwarmError, last: Option<usize>) -> SwarmError {
        match err {
            SwarmError::RunAborted {
                iteration,
                particle,
                reason,
                ..
            } => {
                let checkpoint = match (&self.run_dir, last) {
                    (Some(dir), Some(t)) => Some(dir.checkpoint_path(t)),
                    _ => None,
                };
                if let Some(dir) = &self.run_dir {
                    let _ = dir.write_usage(&self.usage_ledger());
                    if let Ok(mut m) = dir.read_manifest() {
                        m.status = RunStatus::Aborted;
                        m.finished = Some(chrono::Utc::now().to_rfc3339());
                        m.message = Some(reason.clone());
                        let _ = dir.write_manifest(&m);
                    }
                }
                SwarmError::RunAborted {
                    iteration,
                    particle,
                    reason,
                    checkpoint,
                }
            }
            other => other,
        }
    }

    /// The initialization sweep. Ends with the global best defined.
    pub fn initialize(&self) -> Result<SwarmState, SwarmError> {
        let mut trace = Vec::new();
        let mut notes = Vec::new();
        self.initialize_logged(&mut trace, &mut notes)
    }

    fn initialize_logged(
        &self,
        trace: &mut Vec<TraceEvent>,
        notes: &mut Vec<String>,
    ) -> Result<SwarmState, SwarmError> {
        if let Some(dir) = &self.run_dir {
            dir.write_config(&self.config)?;
            dir.write_manifest(&self.manifest())?;
        }
        let outs = self
            .parallel(|i| self.init_particle(i))
            .map_err(|e| self.with_checkpoint(e, None))?;
        self.barrier(0, None, Vec::new(), outs, trace, notes)
    }

    /// One main-loop iteration over all particles.
    pub fn step(&self, state: &SwarmState) -> Result<SwarmState, SwarmError> {
        let mut trace = Vec::new();
        let mut notes = Vec::new();
        self.step_logged(state, &mut trace, &mut notes)
    }

    fn step_logged(
        &self,
        state: &SwarmState,
        trace: &mut Vec<TraceEvent>,
        notes: &mut Vec<String>,
    ) -> Result<SwarmState, SwarmError> {
        let g = state
            .global_best
            .as_ref()
            .ok_or_else(|| SwarmError::CorruptCheckpoint("global best undefined".into()))?;
        let iteration = state.iteration + 1;
        let outs = self
            .parallel(|i| self.iterate_particle(state.particles[i].clone(), iteration, &g.best.position))
            .map_err(|e| self.with_checkpoint(e, Some(state.iteration)))?;
        self.barrier(
            iteration,
            state.global_best.clone(),
            state.trajectory.clone(),
            outs,
            trace,
            notes,
        )
    }

    fn manifest(&self) -> RunManifest {
        let run_id = self
            .run_dir
            .as_ref()
            .and_then(|d| d.root().file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("run-{}", self.config.master_seed));
        RunManifest {
            run_id,
            task: self.bundle.id.clone(),
            provider: self.gateway.provider_name().to_string(),
            optimizer_model: self.config.optimizer_model.clone(),
            executor_model: self.config.executor_model.clone(),
            started: chrono::Utc::now().to_rfc3339(),
            finished: None,
            status: RunStatus::Running,
            iterations_run: 0,
            global_best_fitness: None,
            stopped_early: false,
            message: None,
        }
    }

    /// Full search from scratch.
    pub fn run(&self) -> Result<RunReport, SwarmError> {
        let mut trace = Vec::new();
        let mut notes = Vec::new();
        let state = self.initialize_logged(&mut trace, &mut notes)?;
        self.drive(state, trace, notes)
    }

    /// Continues a search from a checkpointed state.
    pub fn resume(&self, state: SwarmState) -> Result<RunReport, SwarmError> {
        if state.master_seed != self.config.master_seed || state.particles.len() != self.config.n_particles {
            return Err(SwarmError::CorruptCheckpoint(
                "checkpoint does not belong to this configuration".into(),
            ));
        }
        let problems = state.problems();
        if !problems.is_empty() {
            return Err(SwarmError::CorruptCheckpoint(problems.join("; ")));
        }
        {
            let mut base = self.usage_base.lock().expect("usage lock");
            base.0 = state.usage.clone();
            if let Some(dir) = &self.run_dir {
                if let Ok(ledger) = dir.read_usage() {
                    base.1 = ledger;
                }
            }
        }
        if let Some(dir) = &self.run_dir {
            if dir.read_manifest().is_err() {
                dir.write_manifest(&self.manifest())?;
            }
        }
        self.drive(state, Vec::new(), Vec::new())
    }

    fn reached_max(state: &SwarmState) -> bool {
        state.global_fitness().is_some_and(|f| f >= 1.0)
    }

    fn drive(
        &self,
        mut state: SwarmState,
        mut trace: Vec<TraceEvent>,
        mut notes: Vec<String>,
    ) -> Result<RunReport, SwarmError> {
        let mut stopped_early = false;
        while state.iteration < self.config.n_iterations {
            if self.config.early_stop && Self::reached_max(&state) {
                stopped_early = true;
                break;
            }
            state = self.step_logged(&state, &mut trace, &mut notes)?;
        }
        let global_best = state.global_best.clone().expect("defined after the initial sweep");
        let report = RunReport {
            global_best,
            trajectory: state.trajectory.clone(),
            iterations_run: state.iteration,
            stopped_early,
            notes,
            usage: self.usage_totals(),
            trace,
        };
        if let Some(dir) = &self.run_dir {
            dir.write_global_best(&report.global_best.best.position)?;
            dir.write_trajectory(&Trajectory {
                points: report.trajectory.clone(),
            })?;
            dir.write_usage(&self.usage_ledger())?;
            let mut m = dir.read_manifest().unwrap_or_else(|_| self.manifest());
            m.status = RunStatus::Completed;
            m.finished = Some(chrono::Utc::now().to_rfc3339());
            m.iterations_run = report.iterations_run;
            m.global_best_fitness = Some(report.fitness());
            m.stopped_early = stopped_early;
            m.message = Some("global best committed at iteration barriers".into());
            dir.write_manifest(&m)?;
        }
        Ok(report)
    }
}

/// Runs a complete search without a run directory.
pub fn run_search(
    config: SwarmConfig,
    bundle: TaskBundle,
    gateway: Arc<Gateway>,
    prompts: Arc<PromptLibrary>,
) -> Result<RunReport, SwarmError> {
    Swarm::new(config, bundle, gateway, prompts)?.run()
}
