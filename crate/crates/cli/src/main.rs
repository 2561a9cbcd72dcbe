//! `eegalign`: synthesize datasets, train EEG-aligned models and run the
//! RSA evaluations, writing CSV and RTF artifacts.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 degenerate statistic.

mod error;
mod eval;
mod output;
mod settings;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eegalign_core::data::{synth_generate, write_dataset_dir, DatasetDir, Manifest, SynthConfig};

use error::{CliError, CliResult};
use output::{prepare_out, RunManifest};
use settings::Settings;

#[derive(Parser)]
#[command(
    name = "eegalign",
    version,
    about = "EEG alignment training and RSA evaluation"
)]
struct Cli {
    /// Worker threads for decoding and evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Write an untrained checkpoint (the baseline and teacher for a seed).
    Init(train::InitArgs),
    /// Align a model to one subject's EEG or to all subjects pooled.
    Train(train::TrainArgs),
    /// Model-brain comparisons.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Training images (shared by all subjects).
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    test_images: Option<usize>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    latents: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_reps: Option<usize>,
    #[arg(long)]
    test_reps: Option<usize>,
    /// Per-trial EEG noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    signal_gain: Option<f64>,
    #[arg(long)]
    fmri_subjects: Option<usize>,
    /// `key=value` file with any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let s = Settings::load(a.config.as_deref())?;
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_train: s.pick(a.images, "images", d.n_train)?,
        n_test: s.pick(a.test_images, "test-images", d.n_test)?,
        subjects: s.pick(a.subjects, "subjects", d.subjects)?,
        latents: s.pick(a.latents, "latents", d.latents)?,
        seed: s.pick(a.seed, "seed", d.seed)?,
        train_reps: s.pick(a.train_reps, "train-reps", d.train_reps)?,
        test_reps: s.pick(a.test_reps, "test-reps", d.test_reps)?,
        noise_sigma: s.pick(a.noise, "noise", d.noise_sigma)?,
        signal_gain: s.pick(a.signal_gain, "signal-gain", d.signal_gain)?,
        fmri_subjects: s.pick(a.fmri_subjects, "fmri-subjects", d.fmri_subjects)?,
        ..d
    };
    s.finish()?;
    cfg.validate()?;
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("synth");
    run.path("out", &a.out);
    let data = DatasetDir::from_synth(&synth_generate(&cfg)?);
    write_dataset_dir(&a.out, &data)?;
    // the dataset manifest gains subject lists on write; extend that one
    let base = Manifest::read(a.out.join(output::RUN_MANIFEST))?;
    run.write_merged(&a.out, &base)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Init(a) => train::cmd_init(a),
        Command::Train(a) => train::cmd_train(a),
        Command::Eval(c) => eval::cmd_eval(c),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eegalign: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
