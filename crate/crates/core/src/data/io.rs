//! On-disk dataset directory.
//!
//! | file                | contents                                               |
//! |---------------------|--------------------------------------------------------|
//! | `manifest.txt`      | `key=value` lines; lists `eeg_subjects`, `fmri_subjects` |
//! | `images.rtf`        | `train`, `test` and optionally `fmri` image tensors    |
//! | `labels.csv`        | `split,index,concept,category`                         |
//! | `eeg_sub-XX.rtf`    | `train` and `test` trials, `timepoints_ms`             |
//! | `fmri_sub-XX.rtf`   | one `n × voxels` record per ROI, in ROI order          |
//! | `features.rtf`      | `features` (`n_test × F`); names in `features.txt`     |
//! | `latents.rtf`       | generator latents, synthetic datasets only             |
//!
//! Tensors are stored as f32.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::manifest::Manifest;
use super::rtf::{self, NamedTensor};
use super::{EegDataset, FeatureEmbedding, FmriDataset, Split, SynthOutput};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Everything a dataset directory holds.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDir {
    pub manifest: Manifest,
    pub train: Vec<EegDataset>,
    pub test: Vec<EegDataset>,
    pub fmri_images: Option<Tensor>,
    pub fmri: Vec<FmriDataset>,
    pub features: Option<FeatureEmbedding>,
    pub latents: Vec<NamedTensor>,
}

impl DatasetDir {
    pub fn from_synth(out: &SynthOutput) -> Self {
        let c = &out.config;
        let mut m = Manifest::new();
        m.set("kind", "synthetic")
            .set("seed", c.seed)
            .set("train_images", c.n_train)
            .set("test_images", c.n_test)
            .set("train_reps", c.train_reps)
            .set("test_reps", c.test_reps)
            .set("channels", c.channels)
            .set("timepoints", c.timepoints)
            .set("latents", c.latents)
            .set("noise_sigma", c.noise_sigma)
            .set("signal_gain", c.signal_gain)
            .set("shared_mixing", c.shared_mixing)
            .set("gain_spread", c.gain_spread)
            .set(
                "fmri_counts",
                format!(
                    "{},{},{}",
                    c.fmri_counts[0], c.fmri_counts[1], c.fmri_counts[2]
                ),
            )
            .set("voxels", c.voxels)
            .set("fmri_noise", c.fmri_noise)
            .set("features", c.features);
        let has_fmri = !out.fmri.is_empty();
        DatasetDir {
            manifest: m,
            train: out.train.clone(),
            test: out.test.clone(),
            fmri_images: has_fmri.then(|| out.fmri_images.clone()),
            fmri: out.fmri.clone(),
            features: Some(out.features.clone()),
            latents: vec![
                NamedTensor::f32("train", out.train_latents.clone()),
                NamedTensor::f32("test", out.test_latents.clone()),
            ]
            .into_iter()
            .chain(has_fmri.then(|| NamedTensor::f32("fmri", out.fmri_latents.clone())))
            .collect(),
        }
    }

    pub fn subjects(&self) -> Vec<String> {
        self.train.iter().map(|d| d.subject.clone()).collect()
    }

    /// Train and test sets of one EEG subject.
    pub fn subject(&self, id: &str) -> Result<(&EegDataset, &EegDataset)> {
        let pos = self
            .train
            .iter()
            .position(|d| d.subject == id)
            .ok_or_else(|| {
                Error::Data(format!(
                    "no EEG subject '{id}'; available: {}",
                    self.subjects().join(", ")
                ))
            })?;
        Ok((&self.train[pos], &self.test[pos]))
    }
}

fn csv_field(s: &str) -> Result<&str> {
    if s.contains([',', '\n', '"']) {
        return Err(Error::Data(format!("label '{s}' contains a CSV delimiter")));
    }
    Ok(s)
}

pub fn write_dataset_dir(dir: impl AsRef<Path>, data: &DatasetDir) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let first_train = data
        .train
        .first()
        .ok_or_else(|| Error::Data("dataset has no EEG subjects".into()))?;
    let first_test = &data.test[0];

    let mut images = vec![
        NamedTensor::f32("train", first_train.images.clone()),
        NamedTensor::f32("test", first_test.images.clone()),
    ];
    if let Some(f) = &data.fmri_images {
        images.push(NamedTensor::f32("fmri", f.clone()));
    }
    rtf::write(dir.join("images.rtf"), &images)?;

    let mut labels = String::from("split,index,concept,category\n");
    for ds in [first_train, first_test] {
        for (i, (c, k)) in ds.concepts.iter().zip(&ds.categories).enumerate() {
            labels += &format!(
                "{},{i},{},{}\n",
                ds.split.as_str(),
                csv_field(c)?,
                csv_field(k)?
            );
        }
    }
    if let Some(f) = data.fmri.first() {
        for (i, k) in f.categories.iter().enumerate() {
            labels += &format!("fmri,{i},fmri_{i:04},{}\n", csv_field(k)?);
        }
    }
    fs::write(dir.join("labels.csv"), labels)?;

    for (tr, te) in data.train.iter().zip(&data.test) {
        if tr.subject != te.subject {
            return Err(Error::Data(format!(
                "train subject '{}' paired with test subject '{}'",
                tr.subject, te.subject
            )));
        }
        rtf::write(
            dir.join(format!("eeg_sub-{}.rtf", tr.subject)),
            &[
                NamedTensor::f32("train", tr.eeg.clone()),
                NamedTensor::f32("test", te.eeg.clone()),
                NamedTensor::f32("timepoints_ms", Tensor::from_vec(tr.timepoints_ms.clone())),
            ],
        )?;
    }
    for f in &data.fmri {
        let recs: Vec<NamedTensor> = f
            .rois
            .iter()
            .map(|(n, t)| NamedTensor::f32(n.clone(), t.clone()))
            .collect();
        rtf::write(dir.join(format!("fmri_sub-{}.rtf", f.subject)), &recs)?;
    }
    if let Some(feat) = &data.features {
        rtf::write(
            dir.join("features.rtf"),
            &[NamedTensor::f32("features", feat.values.clone())],
        )?;
        fs::write(dir.join("features.txt"), feat.names.join("\n") + "\n")?;
    }
    if !data.latents.is_empty() {
        rtf::write(dir.join("latents.rtf"), &data.latents)?;
    }

    let mut manifest = data.manifest.clone();
    manifest.set("eeg_subjects", data.subjects().join(","));
    manifest.set(
        "fmri_subjects",
        data.fmri
            .iter()
            .map(|f| f.subject.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.write(dir.join(MANIFEST_FILE))
}

struct Labels {
    by_split: BTreeMap<String, Vec<(String, String)>>,
}

fn read_labels(path: &Path) -> Result<Labels> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("split,index,concept,category") {
        return Err(Error::Data(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let mut by_split: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Data(format!(
                "{}:{}: expected 4 fields",
                path.display(),
                no + 2
            )));
        }
        let rows = by_split.entry(f[0].to_owned()).or_default();
        let idx: usize = f[1]
            .parse()
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), no + 2)))?;
        if idx != rows.len() {
            return Err(Error::Data(format!(
                "{}:{}: index {idx} out of order",
                path.display(),
                no + 2
            )));
        }
        rows.push((f[2].to_owned(), f[3].to_owned()));
    }
    Ok(Labels { by_split })
}

fn subject_list(m: &Manifest, key: &str) -> Vec<String> {
    m.get(key)
        .map(|v| {
            v.split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect()
        })
        .unwrap_or_default()
}

pub fn read_dataset_dir(dir: impl AsRef<Path>) -> Result<DatasetDir> {
    let dir = dir.as_ref();
    let manifest = Manifest::read(dir.join(MANIFEST_FILE))?;
    let images = rtf::read(dir.join("images.rtf"))?;
    let labels = read_labels(&dir.join("labels.csv"))?;
    let split_labels = |name: &str, n: usize| -> Result<(Vec<String>, Vec<String>)> {
        let rows = labels.by_split.get(name).map(Vec::as_slice).unwrap_or(&[]);
        if rows.len() != n {
            return Err(Error::Data(format!(
                "labels.csv has {} '{name}' rows for {n} images",
                rows.len()
            )));
        }
        Ok(rows.iter().cloned().unzip())
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in subject_list(&manifest, "eeg_subjects") {
        let recs = rtf::read(dir.join(format!("eeg_sub-{s}.rtf")))?;
        let times = rtf::find(&recs, "timepoints_ms")?.data().to_vec();
        for (split, out) in [(Split::Train, &mut train), (Split::Test, &mut test)] {
            let imgs = rtf::find(&images, split.as_str())?.clone();
            let (concepts, categories) = split_labels(split.as_str(), imgs.shape()[0])?;
            out.push(EegDataset::new(
                s.clone(),
                split,
                imgs,
                rtf::find(&recs, split.as_str())?.clone(),
                concepts,
                categories,
                times.clone(),
            )?);
        }
    }
    if train.is_empty() {
        return Err(Error::Data(format!(
            "{}: manifest lists no eeg_subjects",
            dir.display()
        )));
    }

    let fmri_images = rtf::find(&images, "fmri").ok().cloned();
    let mut fmri = Vec::new();
    for s in subject_list(&manifest, "fmri_subjects") {
        let recs = rtf::read(dir.join(format!("fmri_sub-{s}.rtf")))?;
        let n = recs.first().map_or(0, |r| r.tensor.shape()[0]);
        let (_, categories) = split_labels("fmri", n)?;
        fmri.push(FmriDataset {
            subject: s,
            rois: recs.into_iter().map(|r| (r.name, r.tensor)).collect(),
            categories,
        });
    }

    let features = if dir.join("features.rtf").exists() {
        let recs = rtf::read(dir.join("features.rtf"))?;
        let names: Vec<String> = fs::read_to_string(dir.join("features.txt"))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        Some(FeatureEmbedding::new(
            names,
            rtf::find(&recs, "features")?.clone(),
        )?)
    } else {
        None
    };
    let latents = if dir.join("latents.rtf").exists() {
        rtf::read(dir.join("latents.rtf"))?
    } else {
        Vec::new()
    };

    Ok(DatasetDir {
        manifest,
        train,
        test,
        fmri_images,
        fmri,
        features,
        latents,
    })
}
