//! Pairwise decoding RDMs.
//!
//! For images `i < j`, the trials of `i` (class −1) and `j` (class +1) are
//! split into stratified folds: each class's trial indices are shuffled by
//! a generator seeded with [`pair_seed`], and the `k`-th shuffled trial
//! goes to fold `k mod folds`. For every fold a linear SVM is fit on the
//! remaining trials, with features z-scored by training-fold statistics,
//! and scored on the held-out trials. The RDM entry is the mean held-out
//! accuracy across folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Provenance, Rdm, RdmSource};
use crate::data::EegDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodingConfig {
    pub folds: usize,
    /// L2 regularization strength.
    pub lambda: f64,
    /// Passes over the training trials.
    pub epochs: usize,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            folds: 5,
            lambda: 1e-2,
            epochs: 200,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the unordered pair `{i, j}` under a global seed.
pub fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    splitmix(splitmix(splitmix(seed) ^ a as u64) ^ b as u64)
}

/// Seed for the SVM of one fold.
fn fold_seed(pair: u64, fold: usize) -> u64 {
    splitmix(pair ^ (fold as u64 + 1).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Fold index of every trial of the two classes.
pub fn pair_split(
    reps_a: usize,
    reps_b: usize,
    folds: usize,
    pair: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(pair);
    let mut assign = |reps: usize| {
        let mut order: Vec<usize> = (0..reps).collect();
        order.shuffle(&mut rng);
        let mut fold = vec![0; reps];
        for (k, &trial) in order.iter().enumerate() {
            fold[trial] = k % folds;
        }
        fold
    };
    let a = assign(reps_a);
    let b = assign(reps_b);
    (a, b)
}

/// Linear max-margin classifier fit by stochastic subgradient descent on
/// `λ/2 ‖w‖² + mean hinge`, with step `1/(λ t)`. The bias is an extra
/// constant input and is regularized with the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    /// Weights followed by the bias.
    pub w: Vec<f64>,
}

impl LinearSvm {
    /// `x` is row-major `labels.len() × dim`; labels are ±1.
    pub fn fit(
        x: &[f64],
        labels: &[f64],
        dim: usize,
        lambda: f64,
        epochs: usize,
        seed: u64,
    ) -> Self {
        let m = labels.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; dim + 1];
        let mut order: Vec<usize> = (0..m).collect();
        let mut t = 0usize;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &s in &order {
                t += 1;
                let row = &x[s * dim..(s + 1) * dim];
                let y = labels[s];
                let score = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim];
                let eta = 1.0 / (lambda * t as f64);
                let shrink = 1.0 - eta * lambda;
                for v in w.iter_mut() {
                    *v *= shrink;
                }
                if y * score < 1.0 {
                    let step = eta * y;
                    for (v, a) in w.iter_mut().zip(row) {
                        *v += step * a;
                    }
                    w[dim] += step;
                }
            }
        }
        LinearSvm { w }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let dim = self.w.len() - 1;
        row.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() + self.w[dim]
    }

    /// +1 or −1; a zero score counts as +1.
    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.decision(row) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Channel vector of every trial of `image` at timepoint `t`.
fn trials_at(ds: &EegDataset, image: usize, t: usize) -> Vec<f64> {
    let (c_n, t_n) = (ds.channels(), ds.timepoints());
    let mut out = Vec::with_capacity(ds.reps() * c_n);
    for r in 0..ds.reps() {
        let trial = ds.trial(image, r);
        out.extend((0..c_n).map(|c| trial[c * t_n + t]));
    }
    out
}

/// Mean held-out accuracy of one image pair.
fn pair_accuracy(a: &[f64], b: &[f64], dim: usize, pair: u64, cfg: &DecodingConfig) -> f64 {
    let (na, nb) = (a.len() / dim, b.len() / dim);
    let (fa, fb) = pair_split(na, nb, cfg.folds, pair);
    let mut total = 0.0;
    for fold in 0..cfg.folds {
        let mut train = Vec::new();
        let mut labels = Vec::new();
        let mut test = Vec::new();
        let mut truth = Vec::new();
        for (data, folds, y) in [(a, &fa, -1.0), (b, &fb, 1.0)] {
            for (k, &f) in folds.iter().enumerate() {
                let row = &data[k * dim..(k + 1) * dim];
                if f == fold {
                    test.extend_from_slice(row);
                    truth.push(y);
                } else {
                    train.extend_from_slice(row);
                    labels.push(y);
                }
            }
        }
        let m = labels.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in train.chunks_exact(dim) {
            for (mu, v) in mean.iter_mut().zip(row) {
                *mu += v;
            }
        }
        mean.iter_mut().for_each(|mu| *mu /= m);
        let mut sd = vec![0.0; dim];
        for row in train.chunks_exact(dim) {
            for ((s, v), mu) in sd.iter_mut().zip(row).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / m).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        let standardize = |rows: &mut Vec<f64>| {
            for row in rows.chunks_exact_mut(dim) {
                for ((v, mu), s) in row.iter_mut().zip(&mean).zip(&sd) {
                    *v = (*v - mu) / s;
                }
            }
        };
        standardize(&mut train);
        standardize(&mut test);
        let svm = LinearSvm::fit(
            &train,
            &labels,
            dim,
            cfg.lambda,
            cfg.epochs,
            fold_seed(pair, fold),
        );
        let correct = test
            .chunks_exact(dim)
            .zip(&truth)
            .filter(|(row, &y)| svm.predict(row) == y)
            .count();
        total += correct as f64 / truth.len() as f64;
    }
    total / cfg.folds as f64
}

fn check(ds: &EegDataset, t: usize, cfg: &DecodingConfig) -> Result<()> {
    if t >= ds.timepoints() {
        return Err(Error::invalid(format!(
            "timepoint {t} out of range ({} timepoints)",
            ds.timepoints()
        )));
    }
    if cfg.folds < 2 || ds.reps() < cfg.folds {
        return Err(Error::Data(format!(
            "{} trials per image cannot fill {} folds",
            ds.reps(),
            cfg.folds
        )));
    }
    if ds.n_images() < 2 {
        return Err(Error::Data("decoding needs at least 2 images".into()));
    }
    Ok(())
}

/// Decoding RDM at timepoint index `t`.
pub fn eeg_decoding_rdm(ds: &EegDataset, t: usize, seed: u64, cfg: &DecodingConfig) -> Result<Rdm> {
    Ok(eeg_decoding_rdms(ds, &[t], seed, cfg)?.remove(0))
}

/// Decoding RDMs at several timepoints; pairs and timepoints run in
/// parallel, results do not depend on the schedule.
pub fn eeg_decoding_rdms(
    ds: &EegDataset,
    timepoints: &[usize],
    seed: u64,
    cfg: &DecodingConfig,
) -> Result<Vec<Rdm>> {
    for &t in timepoints {
        check(ds, t, cfg)?;
    }
    let n = ds.n_images();
    let dim = ds.channels();
    let features: Vec<Vec<Vec<f64>>> = timepoints
        .iter()
        .map(|&t| (0..n).map(|i| trials_at(ds, i, t)).collect())
        .collect();
    let jobs: Vec<(usize, usize, usize)> = (0..timepoints.len())
        .flat_map(|k| (0..n).flat_map(move |i| (i + 1..n).map(move |j| (k, i, j))))
        .collect();
    let acc: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, i, j)| {
            pair_accuracy(
                &features[k][i],
                &features[k][j],
                dim,
                pair_seed(seed, i, j),
                cfg,
            )
        })
        .collect();
    let per_t = n * (n - 1) / 2;
    timepoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let prov = Provenance::new(RdmSource::Eeg, format!("{}", ds.timepoints_ms[t]))
                .with_subject(ds.subject.clone());
            Rdm::from_upper(n, &acc[k * per_t..(k + 1) * per_t], prov)
        })
        .collect()
}
