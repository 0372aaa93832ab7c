use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proxnag_bench::commands::{cmd_certify, cmd_gen, cmd_solve, cmd_sweep, cmd_table, StageError};
use proxnag_bench::config::{effective_config, Command, RunConfig};
use proxnag_core::io::KvMap;
use proxnag_core::Error;

#[derive(Parser)]
#[command(name = "proxnag", version, about = "Prox-NAG-GS experiments: generate, solve, certify, sweep, tabulate")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write seeded instances and reference solutions.
    Gen(Common),
    /// Run solvers over seeds and summarize.
    Solve(Common),
    /// Check the Lyapunov and convex-case certificates along Prox-NAG-GS runs.
    Certify(Common),
    /// Run solvers across a grid of penalty weights.
    Sweep(Common),
    /// Print aligned tables from run directories.
    Table {
        /// Directories holding summary.csv.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Problem, as an alternative to --problem.
    #[arg(value_name = "PROBLEM")]
    problem_pos: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    /// `0,1,2` or `0..5`.
    #[arg(long, alias = "seed")]
    seeds: Option<String>,
    /// Absolute value or a multiple of L (`L`, `0.5L`).
    #[arg(long)]
    mu_hat: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Step size as a multiple of 1/L.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    gap_tol: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    /// Directory of instances written by `gen`.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Keep per-step timings in trace files.
    #[arg(long)]
    timing: bool,
    /// Flat key=value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any other configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn flags(&self) -> Result<KvMap, Error> {
        let mut kv = KvMap::new();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{item}'")))?;
            kv.insert(k.trim(), v.trim());
        }
        let problem = match (&self.problem, &self.problem_pos) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("conflicting problems '{b}' and '{a}'")));
            }
            (a, b) => a.as_ref().or(b.as_ref()),
        };
        let pairs = [
            ("problem", problem.cloned()),
            ("variant", self.variant.clone()),
            ("solver", self.solver.clone()),
            ("seeds", self.seeds.clone()),
            ("mu_hat", self.mu_hat.clone()),
            ("alpha", self.alpha.clone()),
            ("eta", self.eta.clone()),
            ("max_iter", self.max_iter.clone()),
            ("gap_tol", self.gap_tol.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("instances", self.instances.as_ref().map(|p| p.display().to_string())),
            ("force", self.force.then(|| "true".to_string())),
            ("timing", self.timing.then(|| "true".to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                kv.insert(k, v);
            }
        }
        Ok(kv)
    }

    fn resolve(&self, cmd: Command) -> Result<(RunConfig, KvMap), StageError> {
        let at = |source| StageError { stage: "config", source };
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    at(Error::Io {
                        path: path.clone(),
                        source: e,
                    })
                })?;
                Some(KvMap::parse(&text).map_err(at)?)
            }
            None => None,
        };
        let effective = effective_config(cmd, file.as_ref(), &self.flags().map_err(at)?);
        let cfg = RunConfig::from_kv(&effective).map_err(at)?;
        Ok((cfg, effective))
    }
}

fn run(cli: Cli) -> Result<(), StageError> {
    let (cmd, common) = match &cli.command {
        Cmd::Table { dirs } => {
            let (table, warnings) = cmd_table(dirs)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            print!("{table}");
            return Ok(());
        }
        Cmd::Gen(c) => (Command::Gen, c),
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Certify(c) => (Command::Certify, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let (cfg, effective) = common.resolve(cmd)?;
    let lines = match cmd {
        Command::Gen => cmd_gen(&cfg, &effective)?,
        Command::Solve => cmd_solve(&cfg, &effective)?,
        Command::Certify => cmd_certify(&cfg, &effective)?,
        Command::Sweep => cmd_sweep(&cfg, &effective)?,
    };
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
