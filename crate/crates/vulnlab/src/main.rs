use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vulnlab::commands::{self, RunOptions};
use vulnlab::manifest::{ExperimentManifest, Overrides};
use vulnlab::render::Format;
use vulnlab::{Error, Result};

/// Vulnerability detection experiments on source-code corpora.
#[derive(Parser)]
#[command(name = "vulnlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PipelineArgs {
    /// Experiment manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory, replacing the manifest's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random choice, replacing the manifest's seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Omit timestamps and timings so reruns produce identical files.
    #[arg(long)]
    reproducible: bool,
    /// Decision threshold on classifier scores.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Window, vectorize and split each corpus into dataset caches.
    Prepare(PipelineArgs),
    /// Train the skip-gram embedding.
    TrainEmbedding(PipelineArgs),
    /// Train one classifier per vulnerability.
    Train(PipelineArgs),
    /// Score the test splits and write reports, ROC curves and a comparison.
    Evaluate(PipelineArgs),
    /// Combine report files into a comparison table.
    Compare {
        /// Report files, or directories searched for `report.json`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// csv, json or markdown.
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank the windows of a source file by vulnerability score.
    Scan {
        /// Model directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Python source file to scan.
        file: PathBuf,
        /// Report windows scoring at or above this.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

fn load(args: &PipelineArgs) -> Result<(ExperimentManifest, RunOptions)> {
    if let Some(t) = args.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Usage(format!("--threshold {t} is outside [0, 1]")));
        }
    }
    let overrides = Overrides { output_dir: args.out.clone(), seed: args.seed, threshold: args.threshold };
    let manifest = ExperimentManifest::load(&args.manifest, &overrides)?;
    log::info!("effective manifest:\n{}", manifest.to_json());
    Ok((manifest, RunOptions { reproducible: args.reproducible }))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Prepare(args) => {
            let (m, opts) = load(&args)?;
            commands::cmd_prepare(&m, &opts)?;
        }
        Command::TrainEmbedding(args) => {
            let (m, opts) = load(&args)?;
            let path = commands::cmd_train_embedding(&m, &opts)?;
            log::info!("wrote {}", path.display());
        }
        Command::Train(args) => {
            let (m, opts) = load(&args)?;
            commands::cmd_train(&m, &opts)?;
        }
        Command::Evaluate(args) => {
            let (m, opts) = load(&args)?;
            commands::cmd_evaluate(&m, &opts)?;
        }
        Command::Compare { reports, format, out } => {
            let format: Format = format.parse()?;
            let text = commands::cmd_compare(&reports, format)?;
            match out {
                Some(path) => vulnlab::artifacts::write(&path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Scan { model, file, threshold } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::Usage(format!("--threshold {threshold} is outside [0, 1]")));
            }
            let findings = commands::cmd_scan(&model, &file, threshold)?;
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &findings).expect("findings serialize");
            let _ = writeln!(stdout);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
