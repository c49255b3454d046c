//! Acceptance checks, one PASS/FAIL/SKIP line per criterion.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use textswarm::gateway::{
    FnProvider, Gateway, HttpProvider, HttpProviderConfig, Provider, RetryPolicy,
};
use textswarm::model::{
    apply_ops, validate_position, AdjustmentOp, EvalOutcome, Flaw, FlawReport, Position,
    PositionUpdateMode, SwarmConfig, TermControl, Velocity,
};
use textswarm::sim::gen;
use textswarm::sim::responders::{convergence_provider, random_provider};
use textswarm::swarm::{RunDir, Swarm};
use textswarm::tasks::{self, synthetic, TaskBundle};
use textswarm::transform::{CallCtx, FailureLedger, LedgerEntry, PromptLibrary, TransformError, Transformer};
use textswarm::Record;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn verdict(r: Result<String, String>) -> Verdict {
    match r {
        Ok(s) => Verdict::Pass(s),
        Err(s) => Verdict::Fail(s),
    }
}

fn swarm_on(bundle: TaskBundle, provider: Arc<dyn Provider>, config: SwarmConfig) -> (Swarm, Arc<Gateway>) {
    let gateway = Arc::new(Gateway::new(provider).with_retry(RetryPolicy::immediate()));
    let s = Swarm::new(config, bundle, gateway.clone(), Arc::new(PromptLibrary::builtin())).expect("valid config");
    (s, gateway)
}

fn swarm(provider: Arc<dyn Provider>, config: SwarmConfig) -> Swarm {
    swarm_on(synthetic::bundle(), provider, config).0
}

fn config(n: usize, t: usize, seed: u64) -> SwarmConfig {
    SwarmConfig {
        n_particles: n,
        n_iterations: t,
        master_seed: seed,
        ..SwarmConfig::default()
    }
}

fn trace_equivalence() -> Verdict {
    verdict((|| {
        let run = common::trace_run();
        ensure(run.calls.len() == run.expected.len(), format!("{} calls, expected {}", run.calls.len(), run.expected.len()))?;
        for ((tag, prompt), (want_tag, want_prompt)) in run.calls.iter().zip(&run.expected) {
            ensure(tag == want_tag, format!("call {tag}, expected {want_tag}"))?;
            ensure(prompt == want_prompt, format!("prompt of {tag} differs"))?;
        }
        let ops: Vec<(usize, &str)> = run.report.trace.iter().map(|e| (e.iteration, e.op.as_str())).collect();
        ensure(ops == common::TRACE_OPS, format!("operator sequence {ops:?}"))?;
        ensure(run.report.global_best.best.position == run.best, "global best differs")?;
        ensure(run.elapsed.as_secs_f64() < 1.0, format!("took {:?}", run.elapsed))?;
        Ok(format!("{} calls byte-exact in {:.0} ms", run.calls.len(), run.elapsed.as_secs_f64() * 1e3))
    })())
}

fn monotonicity() -> Verdict {
    verdict((|| {
        let mut runs = 0;
        let mut checked = 0;
        for seed in 0..12u64 {
            for n in [1, 3, 5] {
                for t in [1, 5, 10] {
                    let s = swarm(random_provider(), config(n, t, 1000 + seed));
                    let mut st = s.initialize().map_err(|e| e.to_string())?;
                    loop {
                        ensure(st.problems().is_empty(), format!("seed {seed} n {n} t {t}: {:?}", st.problems()))?;
                        if st.iteration == t {
                            break;
                        }
                        let next = s.step(&st).map_err(|e| e.to_string())?;
                        ensure(next.global_fitness() >= st.global_fitness(), format!("seed {seed} n {n}: global best fell at t{}", next.iteration))?;
                        for (i, (a, b)) in st.particles.iter().zip(&next.particles).enumerate() {
                            ensure(b.personal_best.fitness >= a.personal_best.fitness, format!("seed {seed} n {n}: particle {i} fell at t{}", next.iteration))?;
                            checked += 1;
                        }
                        st = next;
                    }
                    runs += 1;
                }
            }
        }
        Ok(format!("{runs} runs, {checked} personal-best transitions, 0 violations"))
    })())
}

fn convergence() -> Verdict {
    verdict((|| {
        let report = swarm(convergence_provider(), config(5, 10, 7)).run().map_err(|e| e.to_string())?;
        let got = report.global_best_trajectory();
        let want: Vec<f64> = (0..=10).map(|t| (t as f64 / 5.0).min(1.0)).collect();
        ensure(got == want, format!("trajectory {got:?}"))?;
        let first = got.iter().position(|f| *f >= 1.0).unwrap_or(usize::MAX);
        ensure(first <= 5, format!("fitness 1.0 first at t{first}"))?;
        Ok(format!("trajectory t/5 exact, fitness 1.0 at t{first}"))
    })())
}

fn ctx(seed: u64) -> CallCtx {
    CallCtx {
        particle: 0,
        iteration: 0,
        temperature: 0.7,
        seed,
    }
}

fn transformer(provider: Arc<dyn Provider>) -> Transformer {
    Transformer::new(
        Arc::new(Gateway::new(provider)),
        Arc::new(PromptLibrary::builtin()),
        "opt",
        "answer questions",
    )
}

fn apply_conformance() -> Verdict {
    verdict((|| {
        let t = transformer(Arc::new(FnProvider::new("mute", |_| Ok("no".to_string()))));
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
            let pos = gen::position(&mut rng, 5, 6);
            let vel = gen::velocity(&mut rng, &pos, 5);
            let ops: Vec<AdjustmentOp> = vel.ops().cloned().collect();
            let oracle = apply_ops(&pos, &ops).map_err(|e| format!("seed {seed}: {e}"))?;
            for mode in [PositionUpdateMode::Llm, PositionUpdateMode::Deterministic] {
                let got = t.apply_velocity(&pos, &vel, mode, &ctx(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
                ensure(got.to_record() == oracle.to_record(), format!("seed {seed} {mode:?}: differs from oracle"))?;
                ensure(validate_position(&got).is_valid(), format!("seed {seed}: invalid result"))?;
            }
        }
        Ok("1000 pairs, 0 deviations".into())
    })())
}

fn no_repetition() -> Verdict {
    verdict((|| {
        let (mut accepted, mut rejected, mut ops_seen) = (0, 0, 0);
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(70_000 + seed);
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
            let n = flaws.len();
            let (l2, f2) = (ledgered.clone(), fresh.clone());
            // a model that keeps proposing ledgered operations alongside fresh ones
            let model = FnProvider::new("noisy", move |req| {
                let mut r = ChaCha8Rng::seed_from_u64(req.seed ^ req.tag.len() as u64);
                let items: Vec<serde_json::Value> = (1..=n)
                    .map(|k| {
                        let mut ops = Vec::new();
                        if !f2.is_empty() && r.gen_bool(0.7) {
                            ops.push(f2[r.gen_range(0..f2.len())].clone());
                        }
                        if !l2.is_empty() && r.gen_bool(0.4) {
                            ops.push(l2[r.gen_range(0..l2.len())].clone());
                        }
                        json!({"flaw": k, "ops": ops})
                    })
                    .collect();
                Ok(format!("```json\n{}\n```", json!({ "adjustments": items })))
            });
            match transformer(Arc::new(model)).failure_term(&pos, &ledger, &ctx(seed)) {
                Ok(vel) => {
                    accepted += 1;
                    let quotes: Vec<&str> = ledger.quotes().collect();
                    for op in vel.ops() {
                        ops_seen += 1;
                        let payload = op.canonical();
                        ensure(!quotes.iter().any(|q| q.contains(&payload)), format!("seed {seed}: {payload} repeats a ledgered adjustment"))?;
                    }
                }
                Err(TransformError::RepetitionDetected(_)) => rejected += 1,
                Err(e) => return Err(format!("seed {seed}: {e}")),
            }
        }
        Ok(format!("200 scenarios ({accepted} accepted with {ops_seen} ops, {rejected} rejected), 0 repeats"))
    })())
}

fn replay() -> Verdict {
    verdict((|| {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let c = config(5, 10, 21);
        let full = RunDir::create(tmp.path().join("full")).map_err(|e| e.to_string())?;
        swarm(random_provider(), c.clone()).with_run_dir(full.clone()).run().map_err(|e| e.to_string())?;
        let want = std::fs::read(full.global_best_path()).map_err(|e| e.to_string())?;
        for stop in [0usize, 3, 7] {
            let dir = RunDir::create(tmp.path().join(format!("part{stop}"))).map_err(|e| e.to_string())?;
            {
                let s = swarm(random_provider(), c.clone()).with_run_dir(dir.clone());
                let mut st = s.initialize().map_err(|e| e.to_string())?;
                while st.iteration < stop {
                    st = s.step(&st).map_err(|e| e.to_string())?;
                }
            }
            let restored = dir.read_checkpoint(stop).map_err(|e| e.to_string())?;
            let cfg = dir.read_config().map_err(|e| e.to_string())?;
            swarm(random_provider(), cfg).with_run_dir(dir.clone()).resume(restored).map_err(|e| e.to_string())?;
            let got = std::fs::read(dir.global_best_path()).map_err(|e| e.to_string())?;
            ensure(got == want, format!("resumed at t={stop}: global best differs"))?;
        }
        Ok("resumed at t=0,3,7 on N=5 T=10: byte-identical global best".into())
    })())
}

fn ablation() -> Verdict {
    verdict((|| {
        type Pick = fn(&mut SwarmConfig) -> &mut TermControl;
        let cases: [(&str, Pick, &[&str]); 3] = [
            ("failure", |c| &mut c.term_controls.failure, &["fail", "identify_fail"]),
            ("personal", |c| &mut c.term_controls.personal, &["pers"]),
            ("global", |c| &mut c.term_controls.global, &["glob"]),
        ];
        for (name, pick, ops) in cases {
            let mut c = config(3, 4, 8);
            *pick(&mut c) = TermControl::disabled();
            let (s, gw) = swarm_on(synthetic::bundle(), random_provider(), c);
            s.run().map_err(|e| e.to_string())?;
            let ledger = gw.ledger();
            for op in ops {
                ensure(ledger.calls_for(op) == 0, format!("{name} disabled but {} `{op}` calls", ledger.calls_for(op)))?;
            }
        }
        let full = swarm(convergence_provider(), config(3, 5, 2)).run().map_err(|e| e.to_string())?.fitness();
        let mut ablated = Vec::new();
        for (_, pick, _) in cases {
            let mut c = config(3, 5, 2);
            *pick(&mut c) = TermControl::disabled();
            let f = swarm(convergence_provider(), c).run().map_err(|e| e.to_string())?.fitness();
            ensure(full >= f, format!("all terms {full} < ablated {f}"))?;
            ablated.push(f);
        }
        Ok(format!("0 calls for disabled operators; all terms {full} >= ablations {ablated:?}"))
    })())
}

const SYSTEMS: [(&str, &str); 4] = [
    ("mgsm", include_str!("../fixtures/systems/mgsm.json")),
    ("creative_writing", include_str!("../fixtures/systems/creative_writing.json")),
    ("meeting_scheduling", include_str!("../fixtures/systems/meeting_scheduling.json")),
    ("travel_planner", include_str!("../fixtures/systems/travel_planner.json")),
];

fn round_trips() -> Verdict {
    verdict((|| {
        for seed in 0..1000u64 {
            let mut r = ChaCha8Rng::seed_from_u64(90_000 + seed);
            let pos = gen::position(&mut r, 5, 8);
            ensure(Position::from_record(&pos.to_record()).ok().as_ref() == Some(&pos), format!("position {seed}"))?;
            let report = gen::flaw_report(&mut r, &pos);
            ensure(FlawReport::from_record(&report.to_record()).ok().as_ref() == Some(&report), format!("flaw report {seed}"))?;
            let vel = gen::velocity(&mut r, &pos, 5);
            ensure(Velocity::from_record(&vel.to_record()).ok().as_ref() == Some(&vel), format!("velocity {seed}"))?;
            let outcome = gen::outcome(&mut r);
            ensure(EvalOutcome::from_record(&outcome.to_record()).ok().as_ref() == Some(&outcome), format!("outcome {seed}"))?;
            let cfg = SwarmConfig {
                master_seed: r.gen(),
                n_particles: r.gen_range(1..9),
                ..SwarmConfig::default()
            };
            ensure(SwarmConfig::from_record(&cfg.to_record()).ok().as_ref() == Some(&cfg), format!("config {seed}"))?;
        }
        for (name, text) in SYSTEMS {
            let pos = Position::from_record(text).map_err(|e| format!("{name}: {e}"))?;
            let v = validate_position(&pos);
            ensure(v.is_valid(), format!("{name}: {:?}", v.messages()))?;
        }
        Ok(format!("1000 values x 5 types; {} published systems valid", SYSTEMS.len()))
    })())
}

fn protocol_constants() -> Verdict {
    verdict((|| {
        let d = SwarmConfig::default();
        ensure((d.n_particles, d.n_iterations) == (5, 10), format!("defaults N={} T={}", d.n_particles, d.n_iterations))?;
        for n in [2usize, 5, 8] {
            let temps = SwarmConfig::stratified_temperatures(n, d.temperature_low, d.temperature_high);
            let mut distinct = temps.clone();
            distinct.dedup();
            ensure(distinct.len() == n, format!("n={n}: {temps:?}"))?;
            ensure(temps[0] == d.temperature_low && temps[n - 1] == d.temperature_high, format!("n={n}: {temps:?} does not span the bounds"))?;
        }
        let temps = d.resolved_temperatures();
        Ok(format!("N=5 T=10; temperatures {temps:?}"))
    })())
}

/// Runs only with TEXTSWARM_LIVE_SMOKE=1 and an API key in the environment.
fn live_smoke() -> Verdict {
    if std::env::var("TEXTSWARM_LIVE_SMOKE").ok().as_deref() != Some("1") {
        return Verdict::Skip("set TEXTSWARM_LIVE_SMOKE=1 and a provider key to run".into());
    }
    let mut cfg = HttpProviderConfig::default();
    if let Ok(name) = std::env::var("TEXTSWARM_SMOKE_PROVIDER") {
        cfg.name = name;
    }
    if let Ok(url) = std::env::var("TEXTSWARM_SMOKE_BASE_URL") {
        cfg.base_url = url;
    }
    let budget: u64 = std::env::var("TEXTSWARM_SMOKE_BUDGET").ok().and_then(|s| s.parse().ok()).unwrap_or(2_000_000);
    let provider: Arc<dyn Provider> = match HttpProvider::from_env(cfg) {
        Ok(p) => Arc::new(p),
        Err(e) => return Verdict::Skip(e.to_string()),
    };
    let mut results = Vec::new();
    let mut improved = 0;
    let mut units = 0;
    for seed in 1..=3u64 {
        let mut c = config(3, 3, seed);
        if let Ok(m) = std::env::var("TEXTSWARM_SMOKE_OPTIMIZER") {
            c.optimizer_model = m;
        }
        if let Ok(m) = std::env::var("TEXTSWARM_SMOKE_EXECUTOR") {
            c.executor_model = m;
        }
        let (s, gw) = swarm_on(tasks::arithmetic::bundle(), provider.clone(), c);
        match s.run() {
            Ok(r) => {
                let t = r.global_best_trajectory();
                if t.last() > t.first() {
                    improved += 1;
                }
                units += gw.ledger().total_units();
                results.push(format!("seed {seed}: {t:?}"));
            }
            Err(e) => return Verdict::Fail(format!("seed {seed}: {e}")),
        }
    }
    let detail = format!("{}; improved in {improved}/3; {units} units of {budget}", results.join("; "));
    if units <= budget {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(format!("over budget: {detail}"))
    }
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("algorithm-trace equivalence", trace_equivalence),
        ("monotone personal and global bests", monotonicity),
        ("oracle convergence", convergence),
        ("apply-plan conformance", apply_conformance),
        ("no repetition of failed adjustments", no_repetition),
        ("replay determinism", replay),
        ("ablation plumbing", ablation),
        ("round-trip and schema", round_trips),
        ("protocol constants", protocol_constants),
        ("live smoke", live_smoke),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Verdict::Fail(msg)
        });
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {:>2} {name}: {detail}", k + 1);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
