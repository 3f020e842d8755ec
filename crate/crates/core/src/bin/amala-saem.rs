use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use amala_saem::experiment::{parse_config, run_experiment, ExperimentConfig, ExperimentKind};

/// Maximum-likelihood estimation with AMALA within SAEM.
///
/// Logging verbosity comes from AMALA_SAEM_LOG (error, info, debug).
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AMALA vs MALA on a rotated anisotropic Gaussian.
    BenchSampler(RunArgs),
    /// SAEM on the random-effects toy model, checked against its exact answers.
    FitToy(RunArgs),
    /// Repeated toy fits and the shape of the final estimates.
    CltStudy(RunArgs),
    /// Deformable-template fit on synthetic images.
    FitTemplate(RunArgs),
    /// Images drawn from a template model with paired deformations.
    SampleSynthetic(RunArgs),
    /// Likelihood classification of images under fitted template models.
    Classify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// INI config; without it the defaults of the subcommand are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AMALA_SAEM_LOG", "info"))
        .init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::BenchSampler(a) => (ExperimentKind::BenchSampler, a),
        Command::FitToy(a) => (ExperimentKind::FitToy, a),
        Command::CltStudy(a) => (ExperimentKind::CltStudy, a),
        Command::FitTemplate(a) => (ExperimentKind::FitTemplate, a),
        Command::SampleSynthetic(a) => (ExperimentKind::SampleSynthetic, a),
        Command::Classify(a) => (ExperimentKind::Classify, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), String> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let mut config = match &args.config {
        Some(path) => parse_config(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentConfig::defaults(kind),
    };
    if config.kind != kind {
        return Err(format!("config is for `{}`, not `{kind}`", config.kind));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("out/{kind}")));
    let report = run_experiment(&config, &out).map_err(|e| e.to_string())?;
    for (name, value) in &report.metrics {
        println!("{name} = {value}");
    }
    println!(
        "wrote {} files to {}",
        report.files.len() + 1,
        out.display()
    );
    Ok(())
}
