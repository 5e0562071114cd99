//! `chemolab`: command-line driver for the chemotaxis solvers.

mod commands;
mod manifest;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chemolab::config::Config;
use clap::{Parser, Subcommand};

use commands::{CommandKind, Failure, Plan, EXIT_OK, EXIT_USAGE};
use manifest::Manifest;
use sweep::{run_sweep, SweepSpec};

#[derive(Parser, Debug)]
#[command(name = "chemolab", version = manifest_version(), about = "Parabolic-elliptic chemotaxis laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "chemolab-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random initial perturbations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Time integration of the parabolic-elliptic system.
    Simulate,
    /// Stationary solutions by (deflated) Newton or continuation.
    Steady,
    /// Bifurcation table and linearized spectrum at a constant state.
    Stability,
    /// Spatially homogeneous comparison ODEs.
    CompareOde,
    /// Parameter-regime classification.
    Classify,
    /// Runs `sweep.command` over a grid of one or two parameters.
    Sweep,
}

fn manifest_version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), " (", env!("CHEMOLAB_GIT_DESCRIBE"), ")")
}

fn kind_of(cmd: Cmd) -> Option<CommandKind> {
    match cmd {
        Cmd::Simulate => Some(CommandKind::Simulate),
        Cmd::Steady => Some(CommandKind::Steady),
        Cmd::Stability => Some(CommandKind::Stability),
        Cmd::CompareOde => Some(CommandKind::CompareOde),
        Cmd::Classify => Some(CommandKind::Classify),
        Cmd::Sweep => None,
    }
}

fn record_inputs(m: &mut Manifest, cli: &Cli, path: &Path, cfg: &Config) {
    m.push("config", path.display());
    m.push("seed", cli.seed);
    m.push("threads", cli.threads.map_or("auto".into(), |t| t.to_string()));
    for (k, v) in cfg.iter() {
        m.push(&format!("input.{k}"), v);
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::usage("--config is required"))?;
    let cfg = Config::from_file(path)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let (code, name, artifacts) = match kind_of(cli.command) {
        Some(kind) => {
            let plan = Plan::build(kind, &cfg, cli.seed)?;
            let outcome = plan.execute(&cli.out)?;
            for line in &outcome.lines {
                println!("{line}");
            }
            (outcome.code, kind.name(), outcome.artifacts)
        }
        None => {
            let spec = SweepSpec::from_config(&cfg)?;
            let result = run_sweep(&spec, cli.seed, &cli.out)?;
            let ok = result.rows.iter().filter(|r| matches!(r, Ok(o) if o.code == EXIT_OK)).count();
            println!("sweep of {}: {ok}/{} points succeeded", spec.kind.name(), result.rows.len());
            (result.code, "sweep", result.artifacts)
        }
    };
    let mut m = Manifest::new(name);
    record_inputs(&mut m, cli, path, &cfg);
    m.push("exit_code", code);
    for a in &artifacts {
        m.push("artifact", a);
    }
    m.push("artifact", manifest::FILE_NAME);
    m.write(&cli.out)
        .with_context(|| format!("writing manifest in {}", cli.out.display()))
        .map_err(|e| Failure::usage(format!("{e:#}")))?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
