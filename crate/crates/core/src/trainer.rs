//! Alignment training: pseudo-labels from a frozen teacher, control
//! transforms, and the Adam loop over the composite loss.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{average_repetitions, filter_by_label, EegDataset, FilterReport};
use crate::diffcore::{AdamConfig, AdamState, Graph};
use crate::error::{Error, Result};
use crate::losses::{alignment_loss, AlignmentLossTerms, LossAblation};
use crate::models::{save_checkpoint, AlignedModel, MiniCor};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    None,
    NoCont,
    NoMse,
    Unpaired,
    Scrambled,
}

impl ControlMode {
    pub const ALL: [ControlMode; 5] = [
        ControlMode::None,
        ControlMode::NoCont,
        ControlMode::NoMse,
        ControlMode::Unpaired,
        ControlMode::Scrambled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::None => "none",
            ControlMode::NoCont => "no_cont",
            ControlMode::NoMse => "no_mse",
            ControlMode::Unpaired => "unpaired",
            ControlMode::Scrambled => "scrambled",
        }
    }

    pub fn ablation(self) -> LossAblation {
        LossAblation {
            use_mse: self != ControlMode::NoMse,
            use_contrastive: self != ControlMode::NoCont,
        }
    }

    /// Whether the EEG itself is transformed before training.
    pub fn transforms_data(self) -> bool {
        matches!(self, ControlMode::Unpaired | ControlMode::Scrambled)
    }
}

impl FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControlMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown control mode '{s}' (expected none, no_cont, no_mse, unpaired or scrambled)"
                ))
            })
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingMode {
    PerSubject,
    AcrossSubject,
}

impl PoolingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMode::PerSubject => "per_subject",
            PoolingMode::AcrossSubject => "across_subject",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentConfig {
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub control: ControlMode,
    /// Categories or concepts dropped from the training set.
    pub exclude_labels: Vec<String>,
    /// Recorded for provenance; pooling itself happens in the data module.
    pub pooling: PoolingMode,
    /// Z-score each EEG channel with training-set statistics.
    pub zscore: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            beta: 100.0,
            lr: 2e-5,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            control: ControlMode::None,
            exclude_labels: Vec::new(),
            pooling: PoolingMode::PerSubject,
            zscore: false,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid(format!(
                "batch size must be >= 2 for contrastive pairs, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// Seed of the unpaired/scrambled transform.
    pub fn control_seed(&self) -> u64 {
        self.seed ^ 0x5eed_c0de_0000_0001
    }
}

/// Mean loss terms over the batches of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub terms: AlignmentLossTerms,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: AlignmentConfig,
    pub epochs: Vec<EpochLog>,
    pub checkpoint: Option<PathBuf>,
    pub wall_clock: Duration,
    pub filter: FilterReport,
    pub control_seed: Option<u64>,
    pub pseudo_labels: Vec<usize>,
}

impl TrainReport {
    /// `epoch,l_c,l_mse,l_cont,l_g,l_a,beta`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,l_c,l_mse,l_cont,l_g,l_a,beta\n");
        for e in &self.epochs {
            let t = &e.terms;
            out += &format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch, t.classification, t.mse, t.contrastive, t.generation, t.total, t.beta
            );
        }
        out
    }
}

/// Argmax of the teacher's logits per image (first index on ties).
pub fn pseudo_labels(teacher: &MiniCor, images: &Tensor) -> Result<Vec<usize>> {
    let logits = teacher.features(images)?.logits;
    let k = logits.shape()[1];
    Ok((0..logits.shape()[0])
        .map(|i| {
            let row = logits.row(i);
            (1..k).fold(0, |best, j| if row[j] > row[best] { j } else { best })
        })
        .collect())
}

/// A uniformly random cyclic permutation (Sattolo), so no index maps to
/// itself when `n ≥ 2`.
pub fn derangement(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        p.swap(i, j);
    }
    p
}

/// Unpaired: image `i` receives the recordings of image `perm[i]`.
/// Scrambled: every recording gets its own permutation of the time axis,
/// shared by all of its channels.
pub fn apply_control(ds: &EegDataset, mode: ControlMode, seed: u64) -> Result<EegDataset> {
    let mut out = ds.clone();
    match mode {
        ControlMode::Unpaired => {
            let perm = derangement(ds.n_images(), seed);
            out.eeg = ds.eeg.select_rows(&perm)?;
        }
        ControlMode::Scrambled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (c_n, t_n) = (ds.channels(), ds.timepoints());
            let d = c_n * t_n;
            let mut order: Vec<usize> = (0..t_n).collect();
            for rec in out.eeg.data_mut().chunks_exact_mut(d) {
                order.shuffle(&mut rng);
                let src = rec.to_vec();
                for c in 0..c_n {
                    for (t, &from) in order.iter().enumerate() {
                        rec[c * t_n + t] = src[c * t_n + from];
                    }
                }
            }
        }
        other => {
            return Err(Error::invalid(format!(
                "control '{other}' does not transform data"
            )))
        }
    }
    out.provenance
        .push(format!("apply_control({}, seed={seed})", mode.as_str()));
    Ok(out)
}

/// Per-channel z-score over images and timepoints of `n × D` targets.
fn zscore_channels(targets: &mut Tensor, channels: usize) {
    let n = targets.shape()[0];
    let d = targets.shape()[1];
    let t_n = d / channels;
    let data = targets.data_mut();
    for c in 0..channels {
        let vals = || (0..n).flat_map(move |i| (0..t_n).map(move |t| i * d + c * t_n + t));
        let m = (n * t_n) as f64;
        let mean = vals().map(|k| data[k]).sum::<f64>() / m;
        let sd = (vals().map(|k| (data[k] - mean).powi(2)).sum::<f64>() / m).sqrt();
        let sd = if sd < 1e-12 { 1.0 } else { sd };
        for k in vals() {
            data[k] = (data[k] - mean) / sd;
        }
    }
}

/// The training pairs after filtering, averaging and any control transform.
pub fn prepare_training_set(
    data: &EegDataset,
    cfg: &AlignmentConfig,
) -> Result<(EegDataset, FilterReport)> {
    let (filtered, report) = filter_by_label(data, &cfg.exclude_labels)?;
    let mut avg = average_repetitions(&filtered);
    if cfg.control.transforms_data() {
        avg = apply_control(&avg, cfg.control, cfg.control_seed())?;
    }
    Ok((avg, report))
}

fn add_terms(acc: &mut AlignmentLossTerms, t: &AlignmentLossTerms) {
    acc.classification += t.classification;
    acc.mse += t.mse;
    acc.contrastive += t.contrastive;
    acc.generation += t.generation;
    acc.total += t.total;
}

/// Trains `model` in place. The backbone as passed in is the frozen
/// teacher that supplies the pseudo-labels. When `checkpoint_dir` is set,
/// the trained model is saved there.
pub fn train_alignment(
    model: &mut AlignedModel,
    data: &EegDataset,
    cfg: &AlignmentConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (set, filter) = prepare_training_set(data, cfg)?;
    let n = set.n_images();
    if cfg.batch_size > n {
        return Err(Error::invalid(format!(
            "batch size {} exceeds the {n} training images",
            cfg.batch_size
        )));
    }
    if set.eeg_dim() != model.head.eeg_dim() {
        return Err(Error::Data(format!(
            "dataset EEG has {} values per image, model generates {}",
            set.eeg_dim(),
            model.head.eeg_dim()
        )));
    }
    let labels = pseudo_labels(&model.backbone, &set.images)?;
    let mut targets = set.mean_vectors();
    if cfg.zscore {
        zscore_channels(&mut targets, set.channels());
    }

    let ablation = cfg.control.ablation();
    let mut adam_backbone = AdamState::new(model.backbone.params().values(), AdamConfig::default());
    let mut adam_head = AdamState::new(model.head.params().values(), AdamConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(7);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut acc = AlignmentLossTerms {
            classification: 0.0,
            mse: 0.0,
            contrastive: 0.0,
            generation: 0.0,
            total: 0.0,
            beta: cfg.beta,
        };
        let mut batches = 0;
        for batch in order.chunks_exact(cfg.batch_size) {
            let mut g = Graph::new();
            let x = g.input(set.images.select_rows(batch)?);
            let real = g.input(targets.select_rows(batch)?);
            let out = model.forward(&mut g, x, true)?;
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let nodes = alignment_loss(
                &mut g,
                out.logits,
                &batch_labels,
                out.generated,
                real,
                cfg.beta,
                ablation,
            )?;
            let terms = nodes.terms(&g);
            if !terms.total.is_finite() {
                return Err(Error::Degenerate(format!(
                    "non-finite loss at epoch {epoch}: {terms:?}"
                )));
            }
            add_terms(&mut acc, &terms);
            batches += 1;

            let mut grads = g.backward(nodes.total)?;
            let collect = |ids: &[crate::diffcore::NodeId],
                           values: &[Tensor],
                           grads: &mut crate::diffcore::Gradients|
             -> Vec<Tensor> {
                ids.iter()
                    .zip(values)
                    .map(|(&id, v)| grads.take(id).unwrap_or_else(|| Tensor::zeros(v.shape())))
                    .collect()
            };
            let gb = collect(
                &out.backbone_params,
                model.backbone.params().values(),
                &mut grads,
            );
            let gh = collect(&out.head_params, model.head.params().values(), &mut grads);
            adam_backbone.step(model.backbone.params_mut().values_mut(), &gb, cfg.lr)?;
            adam_head.step(model.head.params_mut().values_mut(), &gh, cfg.lr)?;
        }
        let b = batches as f64;
        acc.classification /= b;
        acc.mse /= b;
        acc.contrastive /= b;
        acc.generation /= b;
        acc.total /= b;
        epochs.push(EpochLog { epoch, terms: acc });
    }

    let checkpoint = match checkpoint_dir {
        Some(dir) => {
            save_checkpoint(model, dir)?;
            Some(dir.to_path_buf())
        }
        None => None,
    };
    Ok(TrainReport {
        config: cfg.clone(),
        epochs,
        checkpoint,
        wall_clock: start.elapsed(),
        filter,
        control_seed: cfg.control.transforms_data().then(|| cfg.control_seed()),
        pseudo_labels: labels,
    })
}
