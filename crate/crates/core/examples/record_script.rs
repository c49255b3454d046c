//! Records the convergence responder's answers for one run as a script file.
//!
//! cargo run -p textswarm-core --example record_script -- <out.json> [particles] [iterations] [seed]

use std::sync::Arc;

use textswarm::gateway::{Gateway, RecordingProvider};
use textswarm::model::SwarmConfig;
use textswarm::sim::responders::convergence_provider;
use textswarm::swarm::Swarm;
use textswarm::tasks::synthetic;
use textswarm::transform::PromptLibrary;
use textswarm::Record;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().expect("output path");
    let num = |i: usize, d: u64| args.get(i).map_or(d, |s| s.parse().expect("number"));
    let config = SwarmConfig {
        n_particles: num(1, 5) as usize,
        n_iterations: num(2, 10) as usize,
        master_seed: num(3, 7),
        ..SwarmConfig::default()
    };
    let rec = Arc::new(RecordingProvider::new(convergence_provider()));
    let swarm = Swarm::new(
        config,
        synthetic::bundle(),
        Arc::new(Gateway::new(rec.clone())),
        Arc::new(PromptLibrary::builtin()),
    )
    .expect("valid config");
    let report = swarm.run().expect("run completes");
    std::fs::write(out, rec.script().to_record()).expect("write script");
    eprintln!("fitness {} after {} iterations", report.fitness(), report.iterations_run);
}
