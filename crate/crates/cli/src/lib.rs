//! Command-line front end for the `cautious` experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use cautious::harness::{self, ExperimentConfig, Format};
use cautious::Error;
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_INVALID_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "cautious", version, about = "Cautious optimizer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run each configured optimizer and write its trajectory.
    Run(Common),
    /// Learning-rate by momentum heatmap per optimizer.
    Sweep(Common),
    /// Best-grid rate for each mask variant.
    #[command(name = "ablate-phi")]
    AblatePhi(Common),
    /// Run the theorem-verification suites; exits 1 on any failure.
    Verify(Common),
    /// Base vs cautious trend benchmark on logistic regression.
    Train(Common),
    /// Integrate a continuous flow and write its trace.
    Dynamics(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config file; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `outputs.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single seed (overrides `seeds` and the verify seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output formats; repeat or comma-separate (overrides `outputs.formats`).
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    pub format: Vec<Format>,
    /// Worker threads (overrides `workers`).
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    /// Loads the config file (if any) and applies flag overrides.
    pub fn resolve(&self) -> cautious::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &self.out {
            cfg.outputs.dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
            let mut plan = cfg.verify.unwrap_or_default();
            plan.seed = seed;
            cfg.verify = Some(plan);
        }
        if !self.format.is_empty() {
            let mut f = self.format.clone();
            f.sort();
            f.dedup();
            cfg.outputs.formats = f;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::NonFinite { .. } | Error::FlowBlowUp { .. } | Error::NonPositiveLoss { .. } => EXIT_VERIFY_FAILED,
        _ => EXIT_INVALID_CONFIG,
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> u8 {
    let common = match &cli.command {
        Command::Run(c)
        | Command::Sweep(c)
        | Command::AblatePhi(c)
        | Command::Verify(c)
        | Command::Train(c)
        | Command::Dynamics(c) => c,
    };
    let cfg = match common.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let outcome = match &cli.command {
        Command::Run(_) => harness::cmd_run(&cfg).map(|f| (f, true)),
        Command::Sweep(_) => harness::cmd_sweep(&cfg).map(|f| (f, true)),
        Command::AblatePhi(_) => harness::cmd_ablate(&cfg).map(|f| (f, true)),
        Command::Train(_) => harness::cmd_train(&cfg).map(|f| (f, true)),
        Command::Dynamics(_) => harness::cmd_dynamics(&cfg).map(|f| (f, true)),
        Command::Verify(_) => harness::cmd_verify(&cfg).map(|(rep, f)| {
            for s in &rep.suites {
                let status = if s.all_passed() {
                    "ok"
                } else if s.gating() {
                    "FAIL"
                } else {
                    "info"
                };
                println!(
                    "{status:4} {:<32} {}/{} min_margin={:e}",
                    s.name, s.passed, s.total, s.min_margin
                );
            }
            (f, rep.passed())
        }),
    };
    match outcome {
        Ok((files, passed)) => {
            print_files(&files);
            if passed {
                EXIT_OK
            } else {
                eprintln!("verification failed");
                EXIT_VERIFY_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses arguments (including the program name) without running anything.
pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match parse_args(args) {
        Ok(cli) => ExitCode::from(execute(&cli)),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}
