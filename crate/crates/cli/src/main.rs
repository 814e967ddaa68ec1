use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use vecreduce_cli::{run, Experiment, ExperimentConfig};

/// Reproducible experiments with reducing matrices, tensor norms and
/// bilinear splittings.
#[derive(Parser, Debug)]
#[command(name = "vecreduce", version)]
struct Cli {
    /// Subcommand to run.
    command: Command,
    /// JSON experiment config; its experiment must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; required without --config, overrides it otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for summary.json, CSV tables and data files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of random trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Do not print the JSON summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    ExampleDim,
    VerifyHolder,
    VerifyKatoPonce,
    CompareNorms,
    Reduce,
    Split,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ExampleDim => "example-dim",
            Command::VerifyHolder => "verify-holder",
            Command::VerifyKatoPonce => "verify-kato-ponce",
            Command::CompareNorms => "compare-norms",
            Command::Reduce => "reduce",
            Command::Split => "split",
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let name = cli.command.name();
    let mut config = match &cli.config {
        Some(path) => {
            let mut config = ExperimentConfig::load(path)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if config.experiment.name() != name {
                bail!("config describes `{}`, not `{name}`", config.experiment.name());
            }
            config
        }
        None => {
            let seed = cli.seed.context("--seed is required when no --config is given")?;
            ExperimentConfig::new(seed, Experiment::default_for(name).expect("every subcommand has defaults"))
        }
    };
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }
    if cli.trials.is_some() {
        config.trials = cli.trials;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = &config.out {
        let written = outcome.write_to(dir).and_then(|_| {
            let path = dir.join("config.json");
            let recorded = ExperimentConfig {
                out: None,
                ..config.clone()
            };
            std::fs::write(&path, recorded.to_json() + "\n").map_err(|e| vecreduce_cli::CliError::Io(path, e))
        });
        if let Err(e) = written {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if !cli.quiet {
        print!("{}", outcome.summary_json());
    }
    for v in &outcome.violations {
        eprintln!("violation: {v}");
    }
    if outcome.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
