//! `textswarm`: run, resume, report on and export swarm searches.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 run or execution aborted (checkpoint kept), 4 missing or corrupt run
//! data, 5 no global best.

mod report;
mod settings;

use clap::{Parser, Subcommand, ValueEnum};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use textswarm::model::{validate_position, Position, SwarmConfig};
use textswarm::runtime::{run_position, ExecCtx, Executor, RuntimeError};
use textswarm::swarm::{RunDir, RunReport, Swarm, SwarmError, EXECUTOR_TEMPERATURE};
use textswarm::transform::PromptLibrary;
use textswarm::Record;

use settings::{FileConfig, ProviderKind, RunSettings, SwarmFlags, SETTINGS_FILE};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(m: impl Into<String>) -> Self {
        Self { code: 2, message: m.into() }
    }
    pub fn aborted(m: impl Into<String>) -> Self {
        Self { code: 3, message: m.into() }
    }
    pub fn run_data(m: impl fmt::Display) -> Self {
        Self { code: 4, message: m.to_string() }
    }
    pub fn no_best(m: impl Into<String>) -> Self {
        Self { code: 5, message: m.into() }
    }
    pub fn other(m: impl Into<String>) -> Self {
        Self { code: 1, message: m.into() }
    }
}

impl From<SwarmError> for Failure {
    fn from(e: SwarmError) -> Self {
        match &e {
            SwarmError::InvalidConfig(problems) => Failure::config(problems.join("; ")),
            SwarmError::RunAborted { checkpoint, .. } => {
                let kept = match checkpoint {
                    Some(p) => format!("; checkpoint kept at {}", p.display()),
                    None => "; no checkpoint".into(),
                };
                Failure::aborted(format!("{e}{kept}"))
            }
            SwarmError::CorruptCheckpoint(_) => Failure::run_data(&e),
            SwarmError::Io(_) => Failure::other(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "textswarm", version, about = "Particle swarm search over multi-agent teams")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Start a search (or continue one with --resume).
    Run(RunArgs),
    /// Continue an interrupted search from its latest checkpoint.
    Resume(ResumeArgs),
    /// Write trajectory rows, plot and summary for a run directory.
    Report {
        run_dir: PathBuf,
        /// Output directory; defaults to <run_dir>/report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the global best team as a standalone artifact.
    ExportBest {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ExportFormat,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute an exported team on one instance and print its answer.
    ExecBest(ExecArgs),
}

#[derive(clap::Args)]
struct ProviderFlags {
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Script file for the scripted provider (`.json` may be omitted).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Name of the live provider; its key is read from TEXTSWARM_API_KEY_<NAME>.
    #[arg(long)]
    provider_name: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML file with run settings and a [swarm] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin task id or path of a task manifest (.toml).
    #[arg(long)]
    task: Option<String>,
    #[command(flatten)]
    swarm: SwarmFlags,
    #[command(flatten)]
    provider: ProviderFlags,
    /// Checkpoint file to continue from; its directory is the run directory.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ResumeArgs {
    run_dir: PathBuf,
    /// Specific checkpoint; defaults to the latest.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    provider: ProviderFlags,
}

#[derive(clap::Args)]
struct ExecArgs {
    /// Exported team (position record).
    artifact: PathBuf,
    /// Instance text.
    #[arg(long)]
    instance: String,
    #[arg(long, default_value = "cli")]
    instance_id: String,
    #[arg(long)]
    executor_model: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Response cache directory (required by --provider cached).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    /// Position record; re-importable and executable.
    Json,
    /// Plain role and workflow listing.
    Text,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("TEXTSWARM_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Resume(a) => cmd_resume(a),
        Cmd::Report { run_dir, out } => cmd_report(&run_dir, out),
        Cmd::ExportBest { run_dir, format, out } => cmd_export_best(&run_dir, format, out),
        Cmd::ExecBest(a) => cmd_exec_best(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn prompts() -> Arc<PromptLibrary> {
    Arc::new(PromptLibrary::builtin())
}

fn print_outcome(report: &RunReport, dir: &RunDir) {
    let t: Vec<String> = report
        .global_best_trajectory()
        .iter()
        .map(|f| format!("{f:.4}"))
        .collect();
    println!("run directory: {}", dir.root().display());
    println!("iterations: {}{}", report.iterations_run, if report.stopped_early { " (stopped early)" } else { "" });
    println!("trajectory: {}", t.join(" "));
    println!("global best fitness: {:.4} (particle {})", report.fitness(), report.global_best.particle);
    println!("calls: {} ({} cached)", report.usage.calls, report.usage.cached_calls);
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    if let Some(ckpt) = &a.resume {
        let dir = ckpt.parent().unwrap_or(Path::new(".")).to_path_buf();
        return cmd_resume(ResumeArgs {
            run_dir: dir,
            checkpoint: Some(ckpt.clone()),
            iterations: a.swarm.iterations,
            workers: a.swarm.workers,
            provider: a.provider,
        });
    }
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut config: SwarmConfig = file.swarm.clone();
    a.swarm.apply(&mut config);
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Failure::config(problems.join("; ")));
    }
    let task = a.task.or(file.task).unwrap_or_else(|| "synthetic-flaws".into());
    let settings = RunSettings {
        task: task.clone(),
        provider: a.provider.provider.or(file.provider).unwrap_or(ProviderKind::Live),
        script: a
            .provider
            .script
            .or(file.script)
            .map(|p| settings::resolve_script(&p).and_then(absolute))
            .transpose()?,
        provider_name: a.provider.provider_name.or(file.provider_name),
        base_url: a.provider.base_url.or(file.base_url),
    };
    let bundle = settings::load_task(&task)?;
    let out = a.out.or(file.out).unwrap_or_else(|| {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S");
        let name = Path::new(&task).file_stem().map_or(task.clone(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("runs").join(format!("{name}-s{}-{stamp}", config.master_seed))
    });
    if out.join("manifest.json").exists() {
        return Err(Failure::config(format!(
            "{} already holds a run; use `resume`",
            out.display()
        )));
    }
    let dir = RunDir::create(&out).map_err(|e| Failure::other(e.to_string()))?;
    let gateway = settings::build_gateway(&settings, Some(&dir.cache_dir()))?;
    dir.write_record(&dir.root().join(SETTINGS_FILE), &settings)
        .map_err(|e| Failure::other(e.to_string()))?;
    let swarm = Swarm::new(config, bundle, gateway, prompts())?.with_run_dir(dir.clone());
    let report = swarm.run()?;
    print_outcome(&report, &dir);
    Ok(())
}

fn absolute(p: PathBuf) -> Result<PathBuf, Failure> {
    std::path::absolute(&p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
}

fn cmd_resume(a: ResumeArgs) -> Result<(), Failure> {
    let dir = RunDir::open(&a.run_dir).map_err(Failure::run_data)?;
    let mut config = dir.read_config().map_err(Failure::run_data)?;
    let mut settings: RunSettings = dir
        .read_record(&dir.root().join(SETTINGS_FILE))
        .map_err(Failure::run_data)?;
    if let Some(p) = a.provider.provider {
        settings.provider = p;
    }
    if let Some(s) = a.provider.script {
        settings.script = Some(absolute(settings::resolve_script(&s)?)?);
    }
    if a.provider.provider_name.is_some() {
        settings.provider_name = a.provider.provider_name;
    }
    if a.provider.base_url.is_some() {
        settings.base_url = a.provider.base_url;
    }
    if let Some(t) = a.iterations {
        config.n_iterations = t;
    }
    if a.workers.is_some() {
        config.workers = a.workers;
    }
    let state = match &a.checkpoint {
        Some(p) => textswarm::swarm::read_checkpoint(p).map_err(Failure::run_data)?,
        None => {
            let (t, _) = dir
                .latest_checkpoint()
                .ok_or_else(|| Failure::run_data(format!("{}: no checkpoint", dir.root().display())))?;
            dir.read_checkpoint(t).map_err(Failure::run_data)?
        }
    };
    let bundle = settings::load_task(&settings.task)?;
    let gateway = settings::build_gateway(&settings, Some(&dir.cache_dir()))?;
    let swarm = Swarm::new(config, bundle, gateway, prompts())?.with_run_dir(dir.clone());
    let report = swarm.resume(state)?;
    print_outcome(&report, &dir);
    Ok(())
}

fn cmd_report(run_dir: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let dir = RunDir::open(run_dir).map_err(Failure::run_data)?;
    let data = report::load(&dir)?;
    let out = out.unwrap_or_else(|| dir.root().join("report"));
    std::fs::create_dir_all(&out).map_err(|e| Failure::other(e.to_string()))?;
    let csv_path = out.join("trajectory.csv");
    report::write_csv(&csv_path, &report::rows(&data.points))?;
    // the plot and summary are drawn from the rows file alone
    let rows = report::read_csv(&csv_path)?;
    let title = match (&data.manifest, data.complete) {
        (Some(m), true) => format!("{} ({})", m.task, m.run_id),
        (Some(m), false) => format!("{} ({}, in progress)", m.task, m.run_id),
        (None, _) => "search trajectory (in progress)".into(),
    };
    std::fs::write(out.join("trajectory.svg"), report::svg(&rows, &title))
        .map_err(|e| Failure::other(e.to_string()))?;
    let summary = report::summary(&data, &rows);
    std::fs::write(out.join("summary.txt"), &summary).map_err(|e| Failure::other(e.to_string()))?;
    print!("{summary}");
    println!("report written to {}", out.display());
    Ok(())
}

/// `global_best.json` of a finished run, or the incumbent of the latest
/// checkpoint of an unfinished one.
fn global_best(dir: &RunDir) -> Result<Position, Failure> {
    if dir.global_best_path().is_file() {
        return dir.read_global_best().map_err(Failure::run_data);
    }
    let Some((t, _)) = dir.latest_checkpoint() else {
        return Err(Failure::no_best(format!(
            "{}: no global best (the run never completed initialization)",
            dir.root().display()
        )));
    };
    let state = dir.read_checkpoint(t).map_err(Failure::run_data)?;
    state
        .global_best
        .map(|g| g.best.position)
        .ok_or_else(|| Failure::no_best("checkpoint holds no global best"))
}

fn cmd_export_best(run_dir: &Path, format: ExportFormat, out: Option<PathBuf>) -> Result<(), Failure> {
    let dir = RunDir::open(run_dir).map_err(Failure::run_data)?;
    let best = global_best(&dir)?;
    let text = match format {
        ExportFormat::Json => best.to_record(),
        ExportFormat::Text => format!("Roles:\n{}\n\nWorkflow:\n{}\n", best.roles_text(), best.workflow_text()),
    };
    match out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Failure::other(e.to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_exec_best(a: ExecArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.artifact)
        .map_err(|e| Failure::run_data(format!("{}: {e}", a.artifact.display())))?;
    let pos = Position::from_record(&text)
        .map_err(|e| Failure::run_data(format!("{}: {e}", a.artifact.display())))?;
    let report = validate_position(&pos);
    if !report.is_valid() {
        return Err(Failure::run_data(format!("invalid team: {}", report.messages().join("; "))));
    }
    let settings = RunSettings {
        task: String::new(),
        provider: a.provider.provider.unwrap_or(ProviderKind::Live),
        script: a.provider.script,
        provider_name: a.provider.provider_name,
        base_url: a.provider.base_url,
    };
    let gateway = settings::build_gateway(&settings, a.cache_dir.as_deref())?;
    let model = a.executor_model.unwrap_or_else(|| SwarmConfig::default().executor_model);
    let executor = Executor::new(gateway, prompts(), model, EXECUTOR_TEMPERATURE);
    let ctx = ExecCtx {
        particle: 0,
        iteration: 0,
        seed: a.seed,
    };
    match run_position(&executor, &pos, &a.instance_id, &a.instance, &ctx) {
        Ok(t) => {
            println!("{}", t.final_answer);
            Ok(())
        }
        Err(e @ RuntimeError::ExecutionAborted { .. }) => Err(Failure::aborted(e.to_string())),
        Err(e) => Err(Failure::run_data(e)),
    }
}
