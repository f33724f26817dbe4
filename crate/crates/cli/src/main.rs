mod ablate;
mod encode;
mod manifest;
mod report;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use m3s_core::M3sError;

#[derive(Debug, Parser)]
#[command(
    name = "m3s",
    version,
    about = "Multi-scale GAF + history fusion classifier for spectra"
)]
pub struct Cli {
    /// Random seed (data generation, split and initialisation).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration file for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a synthetic labeled dataset.
    Synth(synth::SynthArgs),
    /// Write GAF images of a dataset as CSV rows or PNG files.
    Encode(encode::EncodeArgs),
    /// Train a model and write a checkpoint plus loss log.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Evaluate(train::EvaluateArgs),
    /// Train and evaluate a grid of configurations over several seeds.
    Ablate(ablate::AblateArgs),
    /// Aggregate metric reports into mean and standard deviation.
    Report(report::ReportArgs),
}

/// Loads a dataset, choosing the format from the file extension.
pub fn load_data(
    path: &std::path::Path,
    length: usize,
) -> anyhow::Result<m3s_core::spectra::Dataset> {
    use m3s_core::spectra::{load_dataset_with_len, DataFormat};
    Ok(load_dataset_with_len(
        path,
        DataFormat::from_path(path),
        length,
    )?)
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("M3S_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

/// 3 for divergence, 2 for any input or configuration problem.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<M3sError>() {
        Some(M3sError::DivergedLoss { .. }) => 3,
        _ => 2,
    }
}

fn error_name(err: &anyhow::Error) -> &'static str {
    err.downcast_ref::<M3sError>()
        .map_or("InputError", M3sError::name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Cmd::Synth(a) => synth::run(&cli, a),
        Cmd::Encode(a) => encode::run(&cli, a),
        Cmd::Train(a) => train::run_train(&cli, a),
        Cmd::Evaluate(a) => train::run_evaluate(&cli, a),
        Cmd::Ablate(a) => ablate::run(&cli, a),
        Cmd::Report(a) => report::run(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err:#}", error_name(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
