//! Dataset containers, transforms, file formats and the synthetic generator.

pub mod io;
pub mod manifest;
pub mod rtf;
pub mod synth;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use io::{read_dataset_dir, write_dataset_dir, DatasetDir};
pub use manifest::Manifest;
pub use synth::{synth_generate, SynthConfig, SynthOutput, SynthWorld, FMRI_ROIS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Stimulus-locked EEG epochs of one subject (or a pooled super-subject).
#[derive(Debug, Clone, PartialEq)]
pub struct EegDataset {
    pub subject: String,
    pub split: Split,
    /// `n × C × H × W`.
    pub images: Tensor,
    /// `n × reps × channels × timepoints`.
    pub eeg: Tensor,
    /// One concept per image; train and test concept sets are disjoint.
    pub concepts: Vec<String>,
    /// Coarse label per image, the unit of [`filter_by_label`].
    pub categories: Vec<String>,
    /// Latency of each timepoint relative to stimulus onset.
    pub timepoints_ms: Vec<f64>,
    /// Transforms applied since loading, oldest first.
    pub provenance: Vec<String>,
}

impl EegDataset {
    pub fn new(
        subject: impl Into<String>,
        split: Split,
        images: Tensor,
        eeg: Tensor,
        concepts: Vec<String>,
        categories: Vec<String>,
        timepoints_ms: Vec<f64>,
    ) -> Result<Self> {
        let ds = EegDataset {
            subject: subject.into(),
            split,
            images,
            eeg,
            concepts,
            categories,
            timepoints_ms,
            provenance: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.rank() != 4 {
            return Err(Error::Data(format!(
                "images must be n x C x H x W, got {:?}",
                self.images.shape()
            )));
        }
        if self.eeg.rank() != 4 {
            return Err(Error::Data(format!(
                "EEG must be n x reps x channels x timepoints, got {:?}",
                self.eeg.shape()
            )));
        }
        let n = self.images.shape()[0];
        if self.eeg.shape()[0] != n || self.concepts.len() != n || self.categories.len() != n {
            return Err(Error::Data(format!(
                "image count mismatch: {n} images, {} EEG epochs, {} concepts, {} categories",
                self.eeg.shape()[0],
                self.concepts.len(),
                self.categories.len()
            )));
        }
        if self.timepoints_ms.len() != self.timepoints() {
            return Err(Error::Data(format!(
                "{} timepoint latencies for {} timepoints",
                self.timepoints_ms.len(),
                self.timepoints()
            )));
        }
        Ok(())
    }

    pub fn n_images(&self) -> usize {
        self.eeg.shape()[0]
    }

    pub fn reps(&self) -> usize {
        self.eeg.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.eeg.shape()[2]
    }

    pub fn timepoints(&self) -> usize {
        self.eeg.shape()[3]
    }

    /// Channels × timepoints.
    pub fn eeg_dim(&self) -> usize {
        self.channels() * self.timepoints()
    }

    /// One trial as a channel-major `channels × timepoints` slice.
    pub fn trial(&self, image: usize, rep: usize) -> &[f64] {
        let d = self.eeg_dim();
        let start = (image * self.reps() + rep) * d;
        &self.eeg.data()[start..start + d]
    }

    /// Repetition-averaged signals as an `n × D` matrix.
    pub fn mean_vectors(&self) -> Tensor {
        let avg = average_repetitions(self);
        let (n, d) = (self.n_images(), self.eeg_dim());
        avg.eeg.reshape(&[n, d]).expect("numel preserved")
    }

    /// Keeps the given images, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.images = self.images.select_rows(idx)?;
        out.eeg = self.eeg.select_rows(idx)?;
        out.concepts = idx.iter().map(|&i| self.concepts[i].clone()).collect();
        out.categories = idx.iter().map(|&i| self.categories[i].clone()).collect();
        Ok(out)
    }
}

/// fMRI beta patterns of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct FmriDataset {
    pub subject: String,
    /// `(roi name, n_images × voxels)` in a fixed order.
    pub rois: Vec<(String, Tensor)>,
    /// One of `natural`, `shape`, `letter` per image.
    pub categories: Vec<String>,
}

impl FmriDataset {
    pub fn n_images(&self) -> usize {
        self.categories.len()
    }

    pub fn roi(&self, name: &str) -> Option<&Tensor> {
        self.rois.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Restricts every ROI to images of one category.
    pub fn category(&self, category: &str) -> Result<Self> {
        let idx: Vec<usize> = (0..self.n_images())
            .filter(|&i| self.categories[i] == category)
            .collect();
        if idx.is_empty() {
            return Err(Error::Data(format!(
                "no fMRI images in category '{category}'"
            )));
        }
        let rois = self
            .rois
            .iter()
            .map(|(n, t)| Ok((n.clone(), t.select_rows(&idx)?)))
            .collect::<Result<_>>()?;
        Ok(FmriDataset {
            subject: self.subject.clone(),
            rois,
            categories: vec![category.to_owned(); idx.len()],
        })
    }
}

/// Per-stimulus feature scores with named dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEmbedding {
    pub names: Vec<String>,
    /// `n × F`.
    pub values: Tensor,
}

impl FeatureEmbedding {
    pub fn new(names: Vec<String>, values: Tensor) -> Result<Self> {
        if values.rank() != 2 || values.shape()[1] != names.len() {
            return Err(Error::Data(format!(
                "{} feature names for values of shape {:?}",
                names.len(),
                values.shape()
            )));
        }
        if names.len() < 2 {
            return Err(Error::Data("need at least 2 feature dimensions".into()));
        }
        if !values.is_finite() {
            return Err(Error::Data("feature values must be finite".into()));
        }
        Ok(FeatureEmbedding { names, values })
    }

    pub fn n_images(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        let n_f = self.n_features();
        self.values
            .data()
            .iter()
            .skip(f)
            .step_by(n_f)
            .copied()
            .collect()
    }
}

/// Mean over the repetition axis; the result has `reps = 1`.
pub fn average_repetitions(ds: &EegDataset) -> EegDataset {
    let (n, reps, d) = (ds.n_images(), ds.reps(), ds.eeg_dim());
    let mut data = vec![0.0; n * d];
    for i in 0..n {
        let acc = &mut data[i * d..(i + 1) * d];
        for r in 0..reps {
            for (a, v) in acc.iter_mut().zip(ds.trial(i, r)) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= reps as f64;
        }
    }
    let mut out = ds.clone();
    out.eeg = Tensor::new(vec![n, 1, ds.channels(), ds.timepoints()], data)
        .expect("shape matches payload");
    out.provenance
        .push(format!("average_repetitions(reps={reps})"));
    out
}

/// Concatenates trials of all subjects along the repetition axis.
pub fn pool_across_subjects(datasets: &[EegDataset]) -> Result<EegDataset> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Data("no datasets to pool".into()))?;
    for ds in &datasets[1..] {
        if ds.images != first.images || ds.concepts != first.concepts {
            return Err(Error::Data(format!(
                "subject '{}' was shown a different image set than '{}'",
                ds.subject, first.subject
            )));
        }
        if ds.eeg.shape()[2..] != first.eeg.shape()[2..] || ds.split != first.split {
            return Err(Error::Data(format!(
                "subject '{}' EEG shape {:?} does not match {:?}",
                ds.subject,
                ds.eeg.shape(),
                first.eeg.shape()
            )));
        }
    }
    let (n, d) = (first.n_images(), first.eeg_dim());
    let total_reps: usize = datasets.iter().map(|ds| ds.reps()).sum();
    let mut data = Vec::with_capacity(n * total_reps * d);
    for i in 0..n {
        for ds in datasets {
            for r in 0..ds.reps() {
                data.extend_from_slice(ds.trial(i, r));
            }
        }
    }
    let mut out = first.clone();
    out.subject = "pooled".into();
    out.eeg = Tensor::new(
        vec![n, total_reps, first.channels(), first.timepoints()],
        data,
    )?;
    out.provenance
        .push(format!("pool_across_subjects(subjects={})", datasets.len()));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterReport {
    pub kept: usize,
    pub removed: usize,
}

/// Drops every image whose category or concept is in `excluded`.
pub fn filter_by_label(ds: &EegDataset, excluded: &[String]) -> Result<(EegDataset, FilterReport)> {
    let drop = |i: usize| {
        excluded
            .iter()
            .any(|l| *l == ds.categories[i] || *l == ds.concepts[i])
    };
    let keep: Vec<usize> = (0..ds.n_images()).filter(|&i| !drop(i)).collect();
    if keep.is_empty() {
        return Err(Error::Data(format!(
            "excluding {excluded:?} removes every image"
        )));
    }
    let report = FilterReport {
        kept: keep.len(),
        removed: ds.n_images() - keep.len(),
    };
    let mut out = ds.select(&keep)?;
    if !excluded.is_empty() {
        out.provenance
            .push(format!("filter_by_label(excluded={})", excluded.join("|")));
    }
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitReport {
    pub train_concepts: usize,
    pub test_concepts: usize,
}

/// Fails if any concept appears in both splits.
pub fn split_integrity<S: AsRef<str>>(train: &[S], test: &[S]) -> Result<SplitReport> {
    let tr: BTreeSet<&str> = train.iter().map(|s| s.as_ref()).collect();
    let te: BTreeSet<&str> = test.iter().map(|s| s.as_ref()).collect();
    let overlap: Vec<&str> = tr.intersection(&te).copied().collect();
    if !overlap.is_empty() {
        return Err(Error::Data(format!(
            "train and test share concepts: {}",
            overlap.join(", ")
        )));
    }
    Ok(SplitReport {
        train_concepts: tr.len(),
        test_concepts: te.len(),
    })
}
