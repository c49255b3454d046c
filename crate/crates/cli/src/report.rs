//! Trajectory rows, a static SVG plot drawn from those rows, and a text summary.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use textswarm::swarm::{RunDir, RunManifest, RunStatus, TrajectoryPoint};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub iteration: usize,
    pub global_best: f64,
    pub particle: usize,
    pub improved: bool,
    /// Operation summaries of the velocity that produced the improvement.
    pub change: String,
}

pub fn rows(points: &[TrajectoryPoint]) -> Vec<Row> {
    points
        .iter()
        .map(|p| Row {
            iteration: p.iteration,
            global_best: p.global_best,
            particle: p.particle,
            improved: p.improved,
            change: p.cause.join("; "),
        })
        .collect()
}

pub struct RunData {
    pub manifest: Option<RunManifest>,
    pub points: Vec<TrajectoryPoint>,
    pub complete: bool,
}

/// Completed runs read `trajectory.json`; otherwise the latest checkpoint.
pub fn load(dir: &RunDir) -> Result<RunData, Failure> {
    let manifest = dir.read_manifest().ok();
    let completed = manifest.as_ref().is_some_and(|m| m.status == RunStatus::Completed);
    if completed && dir.trajectory_path().is_file() {
        let t = dir.read_trajectory().map_err(Failure::run_data)?;
        return Ok(RunData {
            manifest,
            points: t.points,
            complete: true,
        });
    }
    let (t, _) = dir.latest_checkpoint().ok_or_else(|| {
        Failure::run_data(format!("{}: no trajectory and no checkpoint", dir.root().display()))
    })?;
    let state = dir.read_checkpoint(t).map_err(Failure::run_data)?;
    Ok(RunData {
        manifest,
        points: state.trajectory,
        complete: false,
    })
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::other(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Failure::other(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::other(e.to_string()))
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::run_data(e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| Failure::run_data(format!("{}: {e}", path.display())))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const W: f64 = 760.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Step plot of global-best fitness per iteration; improving points carry
/// their change summary as a label.
pub fn svg(rows: &[Row], title: &str) -> String {
    let max_t = rows.iter().map(|r| r.iteration).max().unwrap_or(0).max(1) as f64;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let x = |t: usize| LEFT + pw * t as f64 / max_t;
    let y = |f: f64| TOP + ph * (1.0 - f.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));
    // axes and grid
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{x2:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{tx:.1}" y="{ty:.1}" text-anchor="end">{f:.2}</text>"##,
            y = y(f),
            x2 = LEFT + pw,
            tx = LEFT - 6.0,
            ty = y(f) + 4.0
        );
    }
    let ticks = max_t as usize;
    for t in 0..=ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            x(t),
            TOP + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b:.1}" stroke="black"/>"#,
        b = TOP + ph,
        r = LEFT + pw
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration</text><text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">global best fitness</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        TOP + ph / 2.0
    );
    if rows.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    // step line
    let mut d = format!("M {:.1} {:.1}", x(rows[0].iteration), y(rows[0].global_best));
    for w in rows.windows(2) {
        let _ = write!(
            d,
            " L {:.1} {:.1} L {:.1} {:.1}",
            x(w[1].iteration),
            y(w[0].global_best),
            x(w[1].iteration),
            y(w[1].global_best)
        );
    }
    let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#1f5fa8" stroke-width="2"/>"##);
    // improvements: marker on the plot, label in the side legend
    let mut k = 0;
    for r in rows.iter().filter(|r| r.improved) {
        k += 1;
        let (px, py) = (x(r.iteration), y(r.global_best));
        let _ = writeln!(
            s,
            r##"<circle cx="{px:.1}" cy="{py:.1}" r="4" fill="#d9480f"/><text x="{:.1}" y="{:.1}" fill="#d9480f">{k}</text>"##,
            px + 5.0,
            py - 6.0
        );
        let change = if r.change.is_empty() { "-" } else { r.change.as_str() };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}"><tspan font-weight="bold">{k}. t{} {:.3}</tspan> {}</text>"#,
            LEFT + pw + 14.0,
            TOP + 14.0 * k as f64,
            r.iteration,
            r.global_best,
            escape(&truncate(change, 34))
        );
    }
    s.push_str("</svg>\n");
    s
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(n - 1).collect();
        t.push('…');
        t
    }
}

pub fn summary(data: &RunData, rows: &[Row]) -> String {
    let mut s = String::new();
    let status = if data.complete { "completed" } else { "in progress" };
    match &data.manifest {
        Some(m) => {
            let _ = writeln!(s, "run {}  task {}  provider {}", m.run_id, m.task, m.provider);
            let _ = writeln!(s, "status: {status}");
            if let Some(msg) = &m.message {
                if m.status == RunStatus::Aborted {
                    let _ = writeln!(s, "aborted: {msg}");
                }
            }
        }
        None => {
            let _ = writeln!(s, "status: {status}");
        }
    }
    if let Some(last) = rows.last() {
        let _ = writeln!(
            s,
            "iterations: {}  global best: {:.4} (particle {})",
            last.iteration, last.global_best, last.particle
        );
    }
    let improving: Vec<&Row> = rows.iter().filter(|r| r.improved).collect();
    let _ = writeln!(s, "improvements: {}", improving.len());
    for r in improving {
        let _ = writeln!(s, "  t{:<3} {:.4}  {}", r.iteration, r.global_best, r.change);
    }
    s
}
