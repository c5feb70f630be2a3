use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynrank::harness::{self, ExperimentConfig, HarnessError, Mode};

/// Dynamic re-ranking experiments: pre-ranker training, bandit case study,
/// page-wise session pipeline.
#[derive(Debug, Parser)]
#[command(name = "dynrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the pairwise pre-ranker and save its parameters.
    Train(RunArgs),
    /// Score a catalog with the pre-ranker.
    Score(RunArgs),
    /// Compare bandit policies on the threshold click model.
    CaseStudy(RunArgs),
    /// Run browsing sessions under static order and DNN-MAB re-ranking.
    Pipeline(RunArgs),
    /// Summarize a finished run directory and verify it against its manifest.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Policy to include (repeatable); case-study only.
    #[arg(long = "policy", value_name = "NAME")]
    policies: Vec<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory written by an earlier run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load(mode: Mode, args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                HarnessError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_text(mode, &text)?
        }
        None => ExperimentConfig::defaults(mode),
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if !args.policies.is_empty() && mode != Mode::CaseStudy {
        return Err(HarnessError::Usage(
            "--policy applies to case-study only".into(),
        ));
    }
    cfg.select_policies(&args.policies)?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), HarnessError> {
    let (mode, args) = match command {
        Command::Report(r) => {
            print!("{}", harness::report(&r.out)?);
            return Ok(());
        }
        Command::Train(a) => (Mode::Train, a),
        Command::Score(a) => (Mode::Score, a),
        Command::CaseStudy(a) => (Mode::CaseStudy, a),
        Command::Pipeline(a) => (Mode::Pipeline, a),
    };
    let cfg = load(mode, &args)?;
    let summary = harness::run(&cfg)?;
    for line in &summary.lines {
        println!("{line}");
    }
    for (name, hash) in &summary.manifest.artifacts {
        println!(
            "wrote {} ({})",
            summary.out_dir.join(name).display(),
            &hash[..12]
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
