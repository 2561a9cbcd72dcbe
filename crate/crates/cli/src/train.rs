use std::path::{Path, PathBuf};

use clap::Args;
use eegalign_core::data::{pool_across_subjects, read_dataset_dir, DatasetDir, EegDataset};
use eegalign_core::models::{save_checkpoint, AlignedModel, BackboneSpec};
use eegalign_core::trainer::{train_alignment, AlignmentConfig, ControlMode, PoolingMode};

use crate::error::{CliError, CliResult};
use crate::output::{prepare_out, write_text, RunManifest};
use crate::settings::Settings;

#[derive(Args)]
pub struct InitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("who").required(true).args(["subject", "across_subjects"])))]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Subject id as listed in the dataset manifest, e.g. `01`.
    #[arg(long)]
    subject: Option<String>,
    /// Pool the trials of every subject into one training set.
    #[arg(long)]
    across_subjects: bool,
    /// Weight of the generation loss [default: 100].
    #[arg(long)]
    beta: Option<f64>,
    /// Adam step size [default: 0.00002].
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 30]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    batch: Option<usize>,
    /// none, no_cont, no_mse, unpaired or scrambled [default: none].
    #[arg(long)]
    control: Option<String>,
    /// Category or concept to drop from training; repeatable.
    #[arg(long = "exclude-label")]
    exclude_label: Vec<String>,
    /// Seeds the initial weights, the teacher and batch shuffling [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Z-score each EEG channel before the generation loss.
    #[arg(long)]
    zscore: bool,
    /// `key=value` file with any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn load_data(path: &Path) -> CliResult<DatasetDir> {
    read_dataset_dir(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn eeg_dim(data: &DatasetDir) -> CliResult<usize> {
    data.train
        .first()
        .map(EegDataset::eeg_dim)
        .ok_or_else(|| CliError::Data("dataset has no EEG subjects".into()))
}

pub fn cmd_init(a: InitArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let model = AlignedModel::new(BackboneSpec::default(), eeg_dim(&data)?, a.seed)?;
    prepare_out(&a.out, a.force)?;
    save_checkpoint(&model, &a.out)?;
    let mut run = RunManifest::new("init");
    run.path("data", &a.data)
        .path("out", &a.out)
        .set("seed", a.seed);
    run.write(&a.out)
}

pub fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let s = Settings::load(a.config.as_deref())?;
    let d = AlignmentConfig::default();
    let control: String = s.pick(a.control, "control", "none".to_string())?;
    let control: ControlMode = control
        .parse()
        .map_err(|e: eegalign_core::Error| CliError::Usage(e.to_string()))?;
    let cfg = AlignmentConfig {
        beta: s.pick(a.beta, "beta", d.beta)?,
        lr: s.pick(a.lr, "lr", d.lr)?,
        epochs: s.pick(a.epochs, "epochs", d.epochs)?,
        batch_size: s.pick(a.batch, "batch", d.batch_size)?,
        seed: s.pick(a.seed, "seed", d.seed)?,
        control,
        exclude_labels: s.list(&a.exclude_label, "exclude-label")?,
        pooling: if a.across_subjects {
            PoolingMode::AcrossSubject
        } else {
            PoolingMode::PerSubject
        },
        zscore: s.switch(a.zscore, "zscore")?,
    };
    s.finish()?;
    cfg.validate()?;

    let data = load_data(&a.data)?;
    let train = match &a.subject {
        Some(id) => data.subject(id)?.0.clone(),
        None => pool_across_subjects(&data.train)?,
    };
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("train");
    let mut model = AlignedModel::new(BackboneSpec::default(), train.eeg_dim(), cfg.seed)?;
    let report = train_alignment(&mut model, &train, &cfg, Some(&a.out))?;
    write_text(&a.out, "report.csv", &report.to_csv())?;

    run.path("data", &a.data)
        .path("out", &a.out)
        .set("subject", a.subject.as_deref().unwrap_or("pooled"))
        .set("pooling", cfg.pooling.as_str())
        .set("beta", cfg.beta)
        .set("lr", cfg.lr)
        .set("epochs", cfg.epochs)
        .set("batch", cfg.batch_size)
        .set("control", cfg.control)
        .set("exclude_labels", cfg.exclude_labels.join(","))
        .set("zscore", cfg.zscore)
        .set("seed", cfg.seed)
        .set("train_images", report.filter.kept)
        .set("removed_images", report.filter.removed);
    if let Some(seed) = report.control_seed {
        run.set("control_seed", seed);
    }
    run.set(
        "train_seconds",
        format!("{:.3}", report.wall_clock.as_secs_f64()),
    );
    run.write(&a.out)
}
