use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{run_check, run_compare, run_oracle, run_simulate, run_sweep, Outcome};
use crate::config::{BackendChoice, Mode, Refresh, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "oscrelax", version, about = "Relaxation of two coupled oscillators under repeated, refreshed interactions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate to equilibrium and write the trajectory CSV.
    Simulate(RunArgs),
    /// Same as `simulate --mode oracle`.
    Oracle(RunArgs),
    /// Closed form against the Fock-space oracle, step by step.
    Compare(RunArgs),
    /// Closed-form runs over a parameter grid.
    Sweep(SweepArgs),
    /// Equilibrium report on an existing trajectory CSV.
    Check(CheckArgs),
}

/// Flags shared by every subcommand. Each one overrides the config file,
/// which overrides the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub omega1: Option<f64>,
    #[arg(long)]
    pub omega2: Option<f64>,
    /// Interaction frequency ω.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Coupling strength λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Interaction window.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Initial temperature of oscillator 1.
    #[arg(long)]
    pub t1: Option<f64>,
    /// Initial temperature of oscillator 2.
    #[arg(long)]
    pub t2: Option<f64>,
    /// Step budget.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Convergence tolerance on θ.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Oracle cutoff per oscillator; adaptive when absent.
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub tail_bound: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub refresh: Option<Refresh>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// compare: relative θ bound (default 1e-6); check: bound on
    /// |ω₁θ₁ − ω₂θ₂| (default 1e-8).
    #[arg(long)]
    pub bound: Option<f64>,
    /// Print the merged config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',')]
    pub sweep_omega1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_omega2: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_omega: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_tau: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_t1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_t2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Trajectory CSV written by `simulate`.
    pub input: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        take!(omega1, omega2, omega, lambda, tau, t1, t2, steps, tol, tail_bound, mode, refresh, backend);
        if self.nmax.is_some() {
            c.nmax = self.nmax;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.bound.is_some() {
            c.bound = self.bound;
        }
        Ok(c)
    }
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = self.run.resolve()?;
        macro_rules! take {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        take!(sweep_omega1, sweep_omega2, sweep_omega, sweep_lambda, sweep_tau, sweep_t1, sweep_t2);
        Ok(c)
    }
}

fn sink(cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            CliError::Config(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_config(cfg: &RunConfig) -> Outcome {
    println!("{}", cfg.to_json());
    Outcome {
        code: 0,
        summary: String::new(),
    }
}

/// Runs a parsed command line.
pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Simulate(a) | Command::Oracle(a) | Command::Compare(a) => {
            let mut cfg = a.resolve()?;
            match cli.command {
                Command::Oracle(_) => cfg.mode = Mode::Oracle,
                Command::Compare(_) => cfg.mode = Mode::Compare,
                _ => {}
            }
            if a.print_config {
                return Ok(print_config(&cfg));
            }
            cfg.validate()?;
            let out = sink(&cfg)?;
            match cfg.mode {
                Mode::Closed => run_simulate(&cfg, out),
                Mode::Oracle => run_oracle(&cfg, out),
                Mode::Compare => run_compare(&cfg, out),
            }
        }
        Command::Sweep(a) => {
            let cfg = a.resolve()?;
            if a.run.print_config {
                return Ok(print_config(&cfg));
            }
            cfg.validate()?;
            run_sweep(&cfg, sink(&cfg)?)
        }
        Command::Check(a) => {
            let cfg = a.run.resolve()?;
            if a.run.print_config {
                return Ok(print_config(&cfg));
            }
            let input = File::open(&a.input).map_err(|e| {
                CliError::Config(format!("cannot open {}: {e}", a.input.display()))
            })?;
            run_check(&cfg, BufReader::new(input), sink(&cfg)?)
        }
    }
}
