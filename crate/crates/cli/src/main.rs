//! `dtnsim`: generate scenarios, run experiments and compare their metrics.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dtnsim_core::generate::{generate, render_energy, GeneratorKind};
use dtnsim_core::sim::metrics::parse_tsv;
use dtnsim_core::sim::runner::write_outputs;
use dtnsim_core::sim::{run_all, ExperimentSpec};

const DEFAULT_OUT: &str = "dtnsim-out";

#[derive(Parser, Debug)]
#[command(
    name = "dtnsim",
    version,
    about = "Delay-tolerant network routing simulator"
)]
struct Cli {
    /// Seed for generators and every scenario (config key `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (config key `out`, else $DTNSIM_OUT, else ./dtnsim-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenarios run in parallel (config key `jobs`).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write per-scenario event traces (config key `trace`).
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a reproducible scenario: network files plus scenario.cfg.
    Generate {
        /// random-topology, grid-plan, cyclic-plan or dumbbell-energy.
        kind: String,
        /// Node count; each kind has its own default.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run a scenario or sweep config and write metrics.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set policy=dhr_cic`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare metrics tables (files or output directories).
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

/// Exit 1: a scenario or its data failed. Exit 2: the invocation was wrong.
enum Failure {
    Scenario(String),
    Usage(String),
}

fn out_dir(flag: Option<&Path>, file: Option<PathBuf>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or(file)
        .or_else(|| std::env::var_os("DTNSIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Scenario(format!("{}: {e}", path.display())))
}

fn cmd_generate(cli: &Cli, kind: &str, n: Option<usize>) -> Result<(), Failure> {
    let kind: GeneratorKind = kind.parse().map_err(Failure::Usage)?;
    let n = n.unwrap_or(kind.default_n());
    let seed = cli.seed.unwrap_or(1);
    let g = generate(kind, n, seed).map_err(Failure::Usage)?;
    let dir = out_dir(cli.out.as_deref(), None);
    fs::create_dir_all(&dir).map_err(|e| Failure::Scenario(format!("{}: {e}", dir.display())))?;
    let mut cfg = format!("# {kind} n={n} seed={seed}\n");
    if let Some(plan) = &g.plan {
        write_file(&dir.join("plan.txt"), &plan.render())?;
        cfg.push_str("plan = plan.txt\n");
    }
    if let Some(topo) = &g.topology {
        write_file(&dir.join("topology.txt"), &topo.render())?;
        cfg.push_str("topology = topology.txt\n");
    }
    if !g.moves.is_empty() {
        let text: String = g.moves.iter().map(|m| m.render() + "\n").collect();
        write_file(&dir.join("moves.txt"), &text)?;
        cfg.push_str("moves = moves.txt\n");
    }
    if !g.energy.is_empty() {
        write_file(&dir.join("energy.txt"), &render_energy(&g.energy))?;
        cfg.push_str("energy = energy.txt\n");
    }
    for (k, v) in &g.config {
        cfg.push_str(&format!("{k} = {v}\n"));
    }
    cfg.push_str(&format!("seed = {seed}\n"));
    write_file(&dir.join("scenario.cfg"), &cfg)?;
    println!("wrote {kind} (n={n}, seed={seed}) to {}", dir.display());
    Ok(())
}

fn cmd_run(cli: &Cli, config: &Path, overrides: &[String]) -> Result<(), Failure> {
    let text = fs::read_to_string(config)
        .map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let usage =
        |e: dtnsim_core::sim::ConfigError| Failure::Usage(format!("{}: {e}", config.display()));
    let mut spec = ExperimentSpec::parse(&text, base).map_err(usage)?;
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        spec.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        spec.set("seed", &seed.to_string());
    }
    if cli.trace {
        spec.set("trace", "true");
    }
    let jobs = match (cli.jobs, spec.base.get("jobs")) {
        (Some(j), _) => j,
        (None, Some(v)) => v
            .parse()
            .map_err(|_| Failure::Usage(format!("invalid value for 'jobs': '{v}'")))?,
        (None, None) => 1,
    };
    let file_out = spec.base.get("out").map(|v| base.join(v));
    let dir = out_dir(cli.out.as_deref(), file_out);
    let configs = spec.scenarios().map_err(usage)?;
    let mut outputs = Vec::new();
    let mut failed = Vec::new();
    for (i, r) in run_all(&configs, jobs).into_iter().enumerate() {
        match r {
            Ok(o) => outputs.push(o),
            Err(e) => failed.push(format!("scenario {i}: {e}")),
        }
    }
    if !failed.is_empty() {
        return Err(Failure::Scenario(failed.join("\n")));
    }
    write_outputs(&dir, &configs, &outputs).map_err(|e| Failure::Scenario(e.to_string()))?;
    println!("{} scenario(s) written to {}", outputs.len(), dir.display());
    Ok(())
}

fn cmd_report(inputs: &[PathBuf]) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for input in inputs {
        let path = if input.is_dir() {
            input.join("metrics.tsv")
        } else {
            input.clone()
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        rows.extend(
            parse_tsv(&text).map_err(|e| Failure::Scenario(format!("{}: {e}", path.display())))?,
        );
    }
    print!("{}", report::render_report(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { kind, n } => cmd_generate(&cli, kind, *n),
        Command::Run { config, overrides } => cmd_run(&cli, config, overrides),
        Command::Report { inputs } => cmd_report(inputs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
