//! Command-line entry point.
//!
//! Exit codes: 0 = study passed, 1 = study ran but a check failed,
//! 2 = configuration/parse error, 3 = numerical or output failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbdsde_lab::{run_experiment, ExperimentConfig, Overrides, StudyKind};

#[derive(Parser)]
#[command(
    name = "rbdsde",
    version,
    about = "Numerical laboratory for reflected backward doubly stochastic differential equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap on worker threads (0 = library default). Affects scheduling
    /// only; results are identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the ensemble seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the number of time steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and report solution invariants.
    Solve(RunArgs),
    /// Check the a-priori moment, comparison, and expansion inequalities.
    VerifyEstimates(RunArgs),
    /// Run the truncation Cauchy-sequence convergence study.
    TruncationStudy(RunArgs),
    /// Measure the empirical convergence rate under grid refinement.
    ConvergenceStudy(RunArgs),
    /// Compare the solver against a closed-form catalog or lattice oracle.
    OracleCompare(RunArgs),
}

impl Command {
    fn split(self) -> (StudyKind, RunArgs) {
        match self {
            Command::Solve(a) => (StudyKind::Solve, a),
            Command::VerifyEstimates(a) => (StudyKind::VerifyEstimates, a),
            Command::TruncationStudy(a) => (StudyKind::TruncationStudy, a),
            Command::ConvergenceStudy(a) => (StudyKind::ConvergenceStudy, a),
            Command::OracleCompare(a) => (StudyKind::OracleCompare, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let (study, args) = cli.command.split();

    let overrides = Overrides {
        seed: args.seed,
        paths: args.paths,
        steps: args.steps,
    };
    let cfg = match ExperimentConfig::load(&args.config, study, overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("rbdsde: {err}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };

    let run = || run_experiment(&cfg, study);
    let outcome = if threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(err) => {
                eprintln!("rbdsde: cannot build thread pool: {err}");
                return ExitCode::from(3);
            }
        }
    } else {
        run()
    };

    match outcome {
        Ok(outcome) => {
            let verdict = if outcome.pass { "PASS" } else { "FAIL" };
            println!(
                "{}: {verdict} (report: {})",
                study.name(),
                outcome.report_path.display()
            );
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("rbdsde: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
