use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mtgibbs::cli::{parse_config, run, Command, Overrides};

#[derive(Parser)]
#[command(name = "mtgibbs", version, about = "Multi-type Gibbs point process fitting and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit a model by conditional pseudo likelihood with sandwich standard errors.
    Fit(Args),
    /// Simulate a pattern by birth-death Metropolis-Hastings.
    Simulate(Args),
    /// Run a Monte-Carlo coverage study.
    Study(Args),
    /// Profile the pseudo likelihood over a grid of interaction ranges.
    Profile(Args),
    /// Kernel estimate of the baseline surface from a fitted model.
    Baseline(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 or absent: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Confidence level for Wald intervals.
    #[arg(long)]
    level: Option<f64>,
    /// 1-based reference type for first-order contrasts.
    #[arg(long)]
    reference_type: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Fit(a) => (Command::Fit, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Study(a) => (Command::Study, a),
        Sub::Profile(a) => (Command::Profile, a),
        Sub::Baseline(a) => (Command::Baseline, a),
    };
    let result = parse_config(&args.config).and_then(|mut cfg| {
        if cfg.command != command {
            return Err(mtgibbs::Error::Config(format!(
                "config is for `{}`, not `{}`",
                cfg.command.name(),
                command.name()
            )));
        }
        Overrides {
            out: args.out,
            seed: args.seed,
            threads: args.threads,
            level: args.level,
            reference_type: args.reference_type,
        }
        .apply(&mut cfg)?;
        run(&cfg)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.message);
            println!("outputs written to {}", outcome.out_dir.display());
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                eprintln!("not every fit converged");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
