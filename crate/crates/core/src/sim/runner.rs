//! Running scenarios, in parallel when asked, and writing their results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::metrics::{render_json, render_tsv};
use super::{
    collect_metrics, contact, energy, positional, ConfigError, Metrics, ScenarioConfig,
    ScenarioKind, SimError, Source, Tally,
};
use crate::contact::NodeId;
use crate::energy::EnergyRecord;
use crate::time::SimTime;

/// A (packet, destination) pair that never arrived.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss {
    pub packet: u64,
    pub dest: NodeId,
    pub created: SimTime,
    pub at: SimTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub metrics: Metrics,
    /// Tab-separated event lines, empty unless tracing.
    pub trace: Vec<String>,
    /// Node sequence of every delivered bundle under single-copy routing.
    pub routes: Vec<Vec<NodeId>>,
    pub losses: Vec<Loss>,
    /// Destinations whose primary path broke and whose traffic moved to
    /// another path.
    pub failovers: u64,
    pub broken_paths: u64,
    /// Deaths, plus per-tick residuals when tracing.
    pub energy: Vec<EnergyRecord>,
}

impl RunOutput {
    pub(crate) fn new(
        cfg: &ScenarioConfig,
        nodes: usize,
        tally: Tally,
        trace: Vec<String>,
        routes: Vec<Vec<NodeId>>,
    ) -> Self {
        RunOutput {
            metrics: collect_metrics(
                cfg.scenario.as_str(),
                cfg.policy.as_str(),
                nodes,
                cfg.seed,
                &tally,
            ),
            trace,
            routes,
            losses: Vec::new(),
            failovers: 0,
            broken_paths: 0,
            energy: Vec::new(),
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    if !cfg.policy.fits(cfg.scenario) {
        return Err(ConfigError::Invalid {
            key: "policy".into(),
            message: format!(
                "'{}' does not apply to {} scenarios",
                cfg.policy,
                cfg.scenario.as_str()
            ),
        }
        .into());
    }
    match cfg.scenario {
        ScenarioKind::Contact => contact::run(cfg),
        ScenarioKind::Multipath => positional::run(cfg),
        ScenarioKind::Energy => energy::run(cfg),
    }
}

/// Runs every scenario on `jobs` worker threads; results keep input order.
pub fn run_all(configs: &[ScenarioConfig], jobs: usize) -> Vec<Result<RunOutput, SimError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| configs.par_iter().map(run_scenario).collect())
}

fn describe(source: &Source) -> String {
    match source {
        Source::Generator { kind, n } => format!("generator {kind} n={n}"),
        Source::Plan(p) => format!("plan {}", p.display()),
        Source::Topology(p) => format!("topology {}", p.display()),
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), SimError> {
    fs::write(&path, text).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes `metrics.tsv`, `metrics.json`, `manifest.txt` and one
/// `trace-<i>.txt` per traced scenario into `dir`.
pub fn write_outputs(
    dir: &Path,
    configs: &[ScenarioConfig],
    outputs: &[RunOutput],
) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let rows: Vec<Metrics> = outputs.iter().map(|o| o.metrics.clone()).collect();
    write(dir.join("metrics.tsv"), &render_tsv(&rows))?;
    write(dir.join("metrics.json"), &render_json(&rows))?;
    let mut manifest = format!("tool\tdtnsim {}\n", env!("CARGO_PKG_VERSION"));
    for (i, (cfg, out)) in configs.iter().zip(outputs).enumerate() {
        writeln!(
            manifest,
            "scenario\t{i}\t{}\t{}\tseed={}\t{}",
            cfg.scenario.as_str(),
            cfg.policy,
            cfg.seed,
            describe(&cfg.source)
        )
        .unwrap();
        if cfg.trace {
            let mut text = out.trace.join("\n");
            for r in &out.energy {
                text.push('\n');
                text.push_str(&r.render());
            }
            text.push('\n');
            write(dir.join(format!("trace-{i}.txt")), &text)?;
        }
    }
    write(dir.join("manifest.txt"), &manifest)
}
