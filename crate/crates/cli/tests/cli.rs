use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use textswarm::gateway::{Gateway, RecordingProvider, Script, ScriptedProvider};
use textswarm::sim::responders::convergence_provider;
use textswarm::tasks::synthetic;
use textswarm::model::{validate_position, Position, SwarmConfig};
use textswarm::runtime::{compile_execution_plan, ExecCtx, Executor};
use textswarm::swarm::{RunDir, RunStatus, Swarm, EXECUTOR_TEMPERATURE};
use textswarm::transform::PromptLibrary;
use textswarm::Record;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn s1() -> PathBuf {
    root().join("fixtures/s1.json")
}

fn textswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textswarm"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Full scripted run with the flags of the documented example.
fn scripted_run(out: &Path) -> Output {
    textswarm(&[
        "run", "--task", "synthetic-flaws", "--particles", "5", "--iterations", "10", "--seed", "7",
        "--provider", "scripted", "--script", "fixtures/s1", "--out", p(out),
    ])
}

#[test]
fn scripted_run_converges_and_populates_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = scripted_run(&out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("global best fitness: 1.0000"), "{}", stdout(&o));
    let dir = RunDir::open(&out).unwrap();
    let m = dir.read_manifest().unwrap();
    assert_eq!(m.status, RunStatus::Completed);
    assert_eq!(m.global_best_fitness, Some(1.0));
    let t: Vec<f64> = dir.read_trajectory().unwrap().points.iter().map(|p| p.global_best).collect();
    assert_eq!(t, [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    for f in ["config.json", "global_best.json", "usage.json", "trace.jsonl", "ckpt_10.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // running again into the same directory is refused
    let again = scripted_run(&out);
    assert_eq!(code(&again), 2);
}

#[test]
fn defaults_are_five_particles_ten_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = textswarm(&["run", "--seed", "7", "--provider", "scripted", "--script", p(&s1()), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = RunDir::open(&out).unwrap().read_config().unwrap();
    assert_eq!((c.n_particles, c.n_iterations), (5, 10));
    assert_eq!(c.resolved_temperatures().len(), 5);
}

#[test]
fn zero_particles_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = textswarm(&[
        "run", "--particles", "0", "--provider", "scripted", "--script", "fixtures/s1", "--out",
        p(&tmp.path().join("r")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_particles ≥ 1"), "{}", stderr(&o));
    assert!(!tmp.path().join("r").exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(&tmp.path().join("r")).to_string();
    for args in [
        vec!["run", "--task", "nope", "--provider", "scripted", "--script", "fixtures/s1", "--out", &out],
        vec!["run", "--provider", "scripted", "--out", &out],
        vec!["run", "--provider", "scripted", "--script", "fixtures/missing", "--out", &out],
    ] {
        assert_eq!(code(&textswarm(&args)), 2, "{args:?}");
    }
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "particles = 3\n").unwrap();
    assert_eq!(code(&textswarm(&["run", "--config", p(&cfg), "--out", &out])), 2);
}

#[test]
fn flags_override_file_and_file_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "task = \"synthetic-flaws\"\nprovider = \"scripted\"\nscript = \"{}\"\n\n[swarm]\nn_particles = 3\nn_iterations = 4\nmaster_seed = 7\noptimizer_model = \"file-model\"\n",
            s1().display()
        ),
    )
    .unwrap();
    let out = tmp.path().join("r");
    let o = textswarm(&["run", "--config", p(&cfg), "--iterations", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = RunDir::open(&out).unwrap().read_config().unwrap();
    let d = SwarmConfig::default();
    assert_eq!(c.n_particles, 3); // file
    assert_eq!(c.n_iterations, 2); // flag
    assert_eq!(c.optimizer_model, "file-model"); // file
    assert_eq!(c.executor_model, d.executor_model); // default
}

/// The s1 script with every call from iteration `from` on removed.
fn truncated_script(from: usize) -> Script {
    let mut s = Script::from_record(&std::fs::read_to_string(s1()).unwrap()).unwrap();
    s.tagged.retain(|tag, _| {
        let t: usize = tag.split('/').nth(2).unwrap().trim_start_matches('t').parse().unwrap();
        t < from
    });
    s
}

#[test]
fn interrupted_run_reports_in_progress_and_resumes_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    assert_eq!(code(&scripted_run(&full)), 0);

    let short = tmp.path().join("short.json");
    std::fs::write(&short, truncated_script(3).to_record()).unwrap();
    let out = tmp.path().join("cut");
    let o = textswarm(&[
        "run", "--particles", "5", "--iterations", "10", "--seed", "7", "--provider", "scripted",
        "--script", p(&short), "--out", p(&out),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("ckpt_2.json"), "{}", stderr(&o));
    let dir = RunDir::open(&out).unwrap();
    assert_eq!(dir.read_manifest().unwrap().status, RunStatus::Aborted);

    let r = textswarm(&["report", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("status: in progress"), "{}", stdout(&r));
    let rows = std::fs::read_to_string(out.join("report/trajectory.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);

    // the incumbent of the checkpoint is exportable before completion
    assert_eq!(code(&textswarm(&["export-best", p(&out)])), 0);

    let ckpt = out.join("ckpt_2.json");
    let o = textswarm(&["run", "--resume", p(&ckpt), "--script", "fixtures/s1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read(out.join("global_best.json")).unwrap(),
        std::fs::read(full.join("global_best.json")).unwrap()
    );
    assert_eq!(dir.read_manifest().unwrap().status, RunStatus::Completed);
    let r = textswarm(&["report", p(&out)]);
    assert!(stdout(&r).contains("status: completed"));
}

#[test]
fn resume_subcommand_uses_saved_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let short = tmp.path().join("short.json");
    std::fs::write(&short, truncated_script(1).to_record()).unwrap();
    let out = tmp.path().join("cut");
    let o = textswarm(&[
        "run", "--seed", "7", "--provider", "scripted", "--script", p(&short), "--out", p(&out),
    ]);
    assert_eq!(code(&o), 3);
    // saved script is still the truncated one: aborts again, checkpoint kept
    assert_eq!(code(&textswarm(&["resume", p(&out)])), 3);
    let o = textswarm(&["resume", p(&out), "--script", p(&s1())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("global best fitness: 1.0000"));
}

#[test]
fn report_rows_plot_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(code(&scripted_run(&out)), 0);
    let o = textswarm(&["report", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut reader = csv::Reader::from_path(out.join("report/trajectory.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    let improved: Vec<(String, String)> = rows
        .iter()
        .filter(|r| &r[3] == "true")
        .map(|r| (r[0].to_string(), r[4].to_string()))
        .collect();
    // improvements after the initial sweep: one jump per fixed feature
    assert_eq!(improved.len(), 6);
    assert_eq!(improved[0], ("0".to_string(), "initial team".to_string()));
    assert_eq!(improved[1].1, "Add Role: Verifier; Add Step 3: Verifier");
    assert_eq!(improved[3].1, "Add Role: Planner; Add Step 1: Planner");

    let svg = std::fs::read_to_string(out.join("report/trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("Add Role: Verifier"));
    assert_eq!(svg.matches("<circle").count(), 6);
    let summary = std::fs::read_to_string(out.join("report/summary.txt")).unwrap();
    assert!(summary.contains("status: completed"));
    assert!(summary.contains("improvements: 6"));

    // re-running is offline and stable
    let first = std::fs::read(out.join("report/trajectory.svg")).unwrap();
    assert_eq!(code(&textswarm(&["report", p(&out)])), 0);
    assert_eq!(std::fs::read(out.join("report/trajectory.svg")).unwrap(), first);
}

#[test]
fn missing_or_corrupt_run_data_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&textswarm(&["report", p(&tmp.path().join("absent"))])), 4);
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&textswarm(&["report", p(&empty)])), 4);
    std::fs::write(empty.join("ckpt_0.json"), "{\"schema_version\": 1}").unwrap();
    assert_eq!(code(&textswarm(&["report", p(&empty)])), 4);
    assert_eq!(code(&textswarm(&["resume", p(&empty)])), 4);
}

#[test]
fn export_without_global_best_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    let o = textswarm(&["export-best", p(tmp.path())]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("no global best"));
}

#[test]
fn exports_are_lossless_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(code(&scripted_run(&out)), 0);
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    assert_eq!(code(&textswarm(&["export-best", p(&out), "--out", p(&a)])), 0);
    assert_eq!(code(&textswarm(&["export-best", p(&out), "--out", p(&b)])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let exported = Position::from_record(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(exported, RunDir::open(&out).unwrap().read_global_best().unwrap());
    assert!(validate_position(&exported).is_valid());
    let text = textswarm(&["export-best", p(&out), "--format", "text"]);
    assert!(stdout(&text).contains("Workflow:"));
}

fn exec_script(steps: usize) -> Script {
    let mut s = Script::default();
    for k in 1..=steps {
        s.push_tagged(format!("exec/p0/t0/cli/s{k}"), format!("answer of step {k}: 42"));
    }
    s
}

fn direct_answer(pos: &Position, script: Script, instance: &str) -> String {
    let gw = Arc::new(Gateway::new(Arc::new(ScriptedProvider::new(script))));
    let ex = Executor::new(gw, Arc::new(PromptLibrary::builtin()), SwarmConfig::default().executor_model, EXECUTOR_TEMPERATURE);
    let plan = compile_execution_plan(pos);
    let ctx = ExecCtx { particle: 0, iteration: 0, seed: 0 };
    ex.execute_plan(&plan, pos, "cli", instance, &ctx).unwrap().final_answer
}

#[test]
fn exported_team_executes_like_the_stored_position() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(code(&scripted_run(&out)), 0);
    let artifact = tmp.path().join("best.json");
    assert_eq!(code(&textswarm(&["export-best", p(&out), "--out", p(&artifact)])), 0);
    let stored = RunDir::open(&out).unwrap().read_global_best().unwrap();
    let script = exec_script(stored.workflow.len());
    let script_path = tmp.path().join("exec.json");
    std::fs::write(&script_path, script.to_record()).unwrap();

    let o = textswarm(&[
        "exec-best", p(&artifact), "--instance", "What is 6 times 7?", "--provider", "scripted",
        "--script", p(&script_path),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let want = direct_answer(&stored, script, "What is 6 times 7?");
    assert_eq!(stdout(&o).trim_end(), want);
    assert_eq!(want, format!("answer of step {}: 42", stored.workflow.len()));
}

#[test]
fn published_system_reimports_and_executes() {
    let fixture = root().join("crates/core/fixtures/systems/mgsm.json");
    let pos = Position::from_record(&std::fs::read_to_string(&fixture).unwrap()).unwrap();
    assert!(validate_position(&pos).is_valid());
    assert_eq!(pos.workflow.len(), 6);
    let tmp = tempfile::tempdir().unwrap();
    let script_path = tmp.path().join("exec.json");
    std::fs::write(&script_path, exec_script(6).to_record()).unwrap();
    let o = textswarm(&[
        "exec-best", p(&fixture), "--instance", "q", "--provider", "scripted", "--script", p(&script_path),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim_end(), "answer of step 6: 42");

    // a step the script cannot answer aborts execution
    std::fs::write(&script_path, exec_script(3).to_record()).unwrap();
    let o = textswarm(&[
        "exec-best", p(&fixture), "--instance", "q", "--provider", "scripted", "--script", p(&script_path),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn the_convergence_script_is_current() {
    // recording the responder again must reproduce the committed file
    let config = SwarmConfig {
        n_particles: 5,
        n_iterations: 10,
        master_seed: 7,
        ..SwarmConfig::default()
    };
    let rec = Arc::new(RecordingProvider::new(convergence_provider()));
    Swarm::new(config, synthetic::bundle(), Arc::new(Gateway::new(rec.clone())), Arc::new(PromptLibrary::builtin()))
        .unwrap()
        .run()
        .unwrap();
    assert_eq!(rec.script().to_record(), std::fs::read_to_string(s1()).unwrap());
}
