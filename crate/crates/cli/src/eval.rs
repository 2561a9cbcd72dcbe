//! `eval` subcommands. Every CSV has a header row; see the README for the
//! column meanings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use eegalign_core::data::rtf;
use eegalign_core::models::{load_checkpoint, AlignedModel};
use eegalign_core::rsa::{
    cross_subject_matrix, curves_csv, eeg_decoding_rdms, feature_profile, feature_rdms, fmri_rdm,
    improvement_stats, layer_rdms, paired_t, rdm_records, rsa_compare, similarity_timecourses,
    variability, variability_csv, window_mean, DecodingConfig, Rdm, SimilarityCurve, TTest,
};
use eegalign_core::Tensor;

use crate::error::{CliError, CliResult};
use crate::output::{prepare_out, write_text, RunManifest};
use crate::train::load_data;

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Per-layer EEG similarity time courses and improvement over a baseline.
    Eeg(EegArgs),
    /// Per-ROI fMRI similarity, reduced by the maximum over layers.
    Fmri(FmriArgs),
    /// Disagreement between model instances per layer and between fMRI
    /// subjects per ROI.
    Variability(VariabilityArgs),
    /// Models tuned to each subject, scored against every subject.
    CrossSubject(CrossSubjectArgs),
    /// Partial r² of each feature dimension, aligned against baseline.
    Features(FeaturesArgs),
    /// Paired t-tests between sets of `eval eeg` outputs.
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct Window {
    /// Start of the summary window, ms.
    #[arg(long, default_value_t = 50.0)]
    window_start: f64,
    /// End of the summary window, ms (inclusive).
    #[arg(long, default_value_t = 200.0)]
    window_end: f64,
    /// Seed of the decoding folds.
    #[arg(long, default_value_t = 0)]
    decode_seed: u64,
}

#[derive(Args)]
pub struct EegArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    /// Subjects to evaluate; repeatable [default: all].
    #[arg(long)]
    subject: Vec<String>,
    /// Name of the model in the `model` column.
    #[arg(long, default_value = "aligned")]
    label: String,
    #[command(flatten)]
    window: Window,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
pub struct FmriArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Restrict to one image category (natural, shape or letter).
    #[arg(long)]
    category: Option<String>,
    #[arg(long, default_value = "aligned")]
    label: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
pub struct VariabilityArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoints to compare; repeat at least twice.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
pub struct CrossSubjectArgs {
    #[arg(long)]
    data: PathBuf,
    /// One checkpoint per subject, in subject order.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    #[arg(long)]
    baseline: PathBuf,
    /// Subjects matching the models [default: all, in manifest order].
    #[arg(long)]
    subject: Vec<String>,
    #[command(flatten)]
    window: Window,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    /// Layer ranked in `top.csv`.
    #[arg(long, default_value = "IT")]
    layer: String,
    /// Rows in `top.csv`.
    #[arg(long, default_value_t = 3)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
pub struct StatsArgs {
    /// `eval eeg` output directories of the first set; repeatable.
    #[arg(long, required = true)]
    a: Vec<PathBuf>,
    /// Directories of the second set, paired with `--a` by position.
    #[arg(long, required = true)]
    b: Vec<PathBuf>,
    /// Model rows taken from the `--a` summaries.
    #[arg(long, default_value = "aligned")]
    a_model: String,
    /// Model rows taken from the `--b` summaries [default: same as --a-model].
    #[arg(long)]
    b_model: Option<String>,
    /// `window_mean` or `window_max`.
    #[arg(long, default_value = "window_mean")]
    column: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

pub fn cmd_eval(c: EvalCommand) -> CliResult<()> {
    match c {
        EvalCommand::Eeg(a) => eval_eeg(a),
        EvalCommand::Fmri(a) => eval_fmri(a),
        EvalCommand::Variability(a) => eval_variability(a),
        EvalCommand::CrossSubject(a) => eval_cross_subject(a),
        EvalCommand::Features(a) => eval_features(a),
        EvalCommand::Stats(a) => eval_stats(a),
    }
}

fn load_model(path: &Path) -> CliResult<AlignedModel> {
    load_checkpoint(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn model_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Layer RDMs, after checking the images fit the model's input.
fn model_layers(model: &AlignedModel, images: &Tensor) -> CliResult<Vec<(String, Rdm)>> {
    let want = model.spec().input;
    if images.shape().len() != 4 || images.shape()[1..] != want {
        return Err(CliError::Data(format!(
            "image set {:?} does not match the model input N x {:?}",
            images.shape(),
            want
        )));
    }
    Ok(layer_rdms(&model.backbone, images)?)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn test_flag(t: &TTest) -> CliResult<()> {
    if t.degenerate {
        Err(CliError::Degenerate(
            "zero variance in paired differences; t, p and d are undefined".into(),
        ))
    } else {
        Ok(())
    }
}

/// EEG decoding RDMs for every timepoint of one subject's test set.
fn subject_eeg(data: &eegalign_core::data::EegDataset, seed: u64) -> CliResult<Vec<Rdm>> {
    let ts: Vec<usize> = (0..data.timepoints()).collect();
    Ok(eeg_decoding_rdms(
        data,
        &ts,
        seed,
        &DecodingConfig::default(),
    )?)
}

fn selected_subjects(requested: &[String], available: Vec<String>) -> Vec<String> {
    if requested.is_empty() {
        available
    } else {
        requested.to_vec()
    }
}

fn eval_eeg(a: EegArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let model = load_model(&a.model)?;
    let baseline = load_model(&a.baseline)?;
    let subjects = selected_subjects(&a.subject, data.subjects());
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("eval eeg");

    let mut curves: Vec<SimilarityCurve> = Vec::new();
    let mut improvement = String::from("subject,layer,peak_ms,baseline,aligned,delta,ratio\n");
    let mut summary = String::from("subject,model,window_mean,window_max\n");
    let mut records = Vec::new();
    for id in &subjects {
        let (_, test) = data.subject(id)?;
        let eeg = subject_eeg(test, a.window.decode_seed)?;
        let times = &test.timepoints_ms;
        let ml = model_layers(&model, &test.images)?;
        let bl = model_layers(&baseline, &test.images)?;
        let (mc, mmax) = similarity_timecourses(&ml, &eeg, times, id, &a.label)?;
        let (bc, bmax) = similarity_timecourses(&bl, &eeg, times, id, "baseline")?;
        for (m, b) in mc.iter().chain([&mmax]).zip(bc.iter().chain([&bmax])) {
            let imp = improvement_stats(m, b)?;
            writeln!(
                improvement,
                "{id},{},{},{},{},{},{}",
                imp.layer,
                imp.peak_ms,
                num(imp.baseline),
                num(imp.aligned),
                num(imp.delta),
                imp.ratio.map(num).unwrap_or_default()
            )
            .unwrap();
        }
        let (lo, hi) = (a.window.window_start, a.window.window_end);
        for (name, layers, max) in [
            (&a.label, &mc, &mmax),
            (&"baseline".to_string(), &bc, &bmax),
        ] {
            let mean = window_mean(layers, lo, hi)?;
            let peak = window_mean(std::slice::from_ref(max), lo, hi)?;
            writeln!(summary, "{id},{name},{},{}", num(mean), num(peak)).unwrap();
        }
        records.extend(eeg);
        curves.extend(mc.into_iter().chain([mmax]).chain(bc).chain([bmax]));
    }
    write_text(&a.out, "curves.csv", &curves_csv(&curves))?;
    write_text(&a.out, "improvement.csv", &improvement)?;
    write_text(&a.out, "summary.csv", &summary)?;
    rtf::write(a.out.join("eeg_rdms.rtf"), &rdm_records(&records))?;
    run.path("data", &a.data)
        .path("model", &a.model)
        .path("baseline", &a.baseline)
        .set("subjects", subjects.join(","))
        .set(
            "window_ms",
            format!("{}-{}", a.window.window_start, a.window.window_end),
        )
        .set("decode_seed", a.window.decode_seed);
    run.write(&a.out)
}

fn eval_fmri(a: FmriArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let images = data
        .fmri_images
        .as_ref()
        .ok_or_else(|| CliError::Data("dataset has no fMRI images".into()))?;
    if data.fmri.is_empty() {
        return Err(CliError::Data("dataset has no fMRI subjects".into()));
    }
    let mut models = vec![(a.label.clone(), load_model(&a.model)?)];
    if let Some(b) = &a.baseline {
        models.push(("baseline".into(), load_model(b)?));
    }
    let rows: Vec<usize> = match &a.category {
        None => (0..images.shape()[0]).collect(),
        Some(cat) => data.fmri[0]
            .categories
            .iter()
            .enumerate()
            .filter(|(_, c)| *c == cat)
            .map(|(i, _)| i)
            .collect(),
    };
    let images = images.select_rows(&rows)?;
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("eval fmri");

    let mut csv = String::from("subject,model,roi,layer,rho\n");
    let mut summary = String::from("model,roi,rho\n");
    for (name, model) in &models {
        let layers = model_layers(model, &images)?;
        let mut per_roi: Vec<(String, Vec<f64>)> = Vec::new();
        for subject in &data.fmri {
            let subject = match &a.category {
                Some(cat) => subject.category(cat)?,
                None => subject.clone(),
            };
            for (roi, patterns) in &subject.rois {
                let target = fmri_rdm(patterns, roi.clone(), subject.subject.clone())?;
                let mut best = f64::NEG_INFINITY;
                for (layer, rdm) in &layers {
                    let rho = rsa_compare(rdm, &target)?.rho;
                    best = best.max(rho);
                    writeln!(csv, "{},{name},{roi},{layer},{}", subject.subject, num(rho)).unwrap();
                }
                writeln!(csv, "{},{name},{roi},max,{}", subject.subject, num(best)).unwrap();
                match per_roi.iter_mut().find(|(r, _)| r == roi) {
                    Some((_, v)) => v.push(best),
                    None => per_roi.push((roi.clone(), vec![best])),
                }
            }
        }
        for (roi, v) in per_roi {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            writeln!(summary, "{name},{roi},{}", num(mean)).unwrap();
        }
    }
    write_text(&a.out, "fmri.csv", &csv)?;
    write_text(&a.out, "fmri_summary.csv", &summary)?;
    run.path("data", &a.data)
        .path("model", &a.model)
        .set("category", a.category.as_deref().unwrap_or("all"));
    if let Some(b) = &a.baseline {
        run.path("baseline", b);
    }
    run.write(&a.out)
}

fn eval_variability(a: VariabilityArgs) -> CliResult<()> {
    if a.model.len() < 2 {
        return Err(CliError::Usage(
            "variability needs at least two --model".into(),
        ));
    }
    let data = load_data(&a.data)?;
    let images = &data
        .test
        .first()
        .ok_or_else(|| CliError::Data("dataset has no EEG test images".into()))?
        .images;
    let labels: Vec<String> = a.model.iter().map(|p| model_name(p)).collect();
    let per_model: Vec<Vec<(String, Rdm)>> = a
        .model
        .iter()
        .map(|p| model_layers(&load_model(p)?, images))
        .collect::<CliResult<_>>()?;
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("eval variability");

    let mut matrices = Vec::new();
    for (k, (layer, _)) in per_model[0].iter().enumerate() {
        let rdms: Vec<Rdm> = per_model.iter().map(|m| m[k].1.clone()).collect();
        matrices.push(variability(layer, &labels, &rdms)?);
    }
    if data.fmri.len() >= 2 {
        let subjects: Vec<String> = data.fmri.iter().map(|f| f.subject.clone()).collect();
        for (roi, _) in &data.fmri[0].rois {
            let rdms = data
                .fmri
                .iter()
                .map(|f| {
                    let p = f.roi(roi).ok_or_else(|| {
                        CliError::Data(format!("fMRI subject {} lacks ROI {roi}", f.subject))
                    })?;
                    Ok(fmri_rdm(p, roi.clone(), f.subject.clone())?)
                })
                .collect::<CliResult<Vec<_>>>()?;
            matrices.push(variability(&format!("fmri:{roi}"), &subjects, &rdms)?);
        }
    }
    write_text(&a.out, "variability.csv", &variability_csv(&matrices))?;
    run.path("data", &a.data).set("models", labels.join(","));
    run.write(&a.out)
}

fn eval_cross_subject(a: CrossSubjectArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let subjects = selected_subjects(&a.subject, data.subjects());
    if subjects.len() != a.model.len() {
        return Err(CliError::Usage(format!(
            "{} models for {} subjects; pass one --model per subject",
            a.model.len(),
            subjects.len()
        )));
    }
    let models: Vec<AlignedModel> = a
        .model
        .iter()
        .map(|p| load_model(p))
        .collect::<CliResult<_>>()?;
    let baseline = load_model(&a.baseline)?;
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("eval cross-subject");

    let (lo, hi) = (a.window.window_start, a.window.window_end);
    let m = subjects.len();
    let mut cells = vec![vec![0.0; m]; m];
    let mut base = vec![0.0; m];
    for (j, id) in subjects.iter().enumerate() {
        let (_, test) = data.subject(id)?;
        let eeg = subject_eeg(test, a.window.decode_seed)?;
        let score = |model: &AlignedModel| -> CliResult<f64> {
            let layers = model_layers(model, &test.images)?;
            let (curves, _) = similarity_timecourses(&layers, &eeg, &test.timepoints_ms, id, "m")?;
            Ok(window_mean(&curves, lo, hi)?)
        };
        for (i, model) in models.iter().enumerate() {
            cells[i][j] = score(model)?;
        }
        base[j] = score(&baseline)?;
    }
    let cs = cross_subject_matrix(&cells, &base)?;
    let mut csv = String::from("model,subject,rho,minus_baseline,normalized\n");
    for i in 0..m {
        for (j, id) in subjects.iter().enumerate() {
            writeln!(
                csv,
                "{},{id},{},{},{}",
                model_name(&a.model[i]),
                num(cs.matrix[i][j]),
                num(cs.minus_baseline[i][j]),
                num(cs.column_normalized[i][j])
            )
            .unwrap();
        }
    }
    let t = &cs.test;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let test = format!(
        "n,matched,mismatched,mean_diff,t,df,p,d,degenerate\n{},{},{},{},{},{},{},{},{}\n",
        t.n,
        num(mean(&cs.matched)),
        num(mean(&cs.mismatched)),
        num(t.mean),
        num(t.t),
        num(t.df),
        num(t.p),
        num(t.d),
        t.degenerate
    );
    write_text(&a.out, "cross_subject.csv", &csv)?;
    write_text(&a.out, "cross_subject_test.csv", &test)?;
    run.path("data", &a.data)
        .path("baseline", &a.baseline)
        .set(
            "models",
            a.model
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        )
        .set("subjects", subjects.join(","))
        .set("window_ms", format!("{lo}-{hi}"))
        .set("decode_seed", a.window.decode_seed);
    run.write(&a.out)?;
    test_flag(t)
}

fn eval_features(a: FeaturesArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let features = data
        .features
        .as_ref()
        .ok_or_else(|| CliError::Data("dataset has no feature embedding".into()))?;
    let images = &data
        .test
        .first()
        .ok_or_else(|| CliError::Data("dataset has no EEG test images".into()))?
        .images;
    if features.n_images() != images.shape()[0] {
        return Err(CliError::Data(format!(
            "feature embedding covers {} images, test set has {}",
            features.n_images(),
            images.shape()[0]
        )));
    }
    let model = model_layers(&load_model(&a.model)?, images)?;
    let baseline = model_layers(&load_model(&a.baseline)?, images)?;
    if !model.iter().any(|(l, _)| *l == a.layer) {
        return Err(CliError::Usage(format!(
            "unknown layer '{}' (V1, V2, V4 or IT)",
            a.layer
        )));
    }
    let frdms = feature_rdms(features)?;
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("eval features");

    let mut csv = String::from("layer,dimension,model,partial_r2,r,ridge,degenerate\n");
    let mut ranked = Vec::new();
    for ((layer, m), (_, b)) in model.iter().zip(&baseline) {
        let pm = feature_profile(m, &frdms)?;
        let pb = feature_profile(b, &frdms)?;
        for (name, profile) in [("aligned", &pm), ("baseline", &pb)] {
            for (f, p) in profile.iter().enumerate() {
                writeln!(
                    csv,
                    "{layer},{},{name},{},{},{},{}",
                    features.names[f],
                    num(p.r2),
                    num(p.r),
                    p.ridge,
                    p.degenerate
                )
                .unwrap();
            }
        }
        if *layer == a.layer {
            ranked = (0..frdms.len())
                .map(|f| (f, pb[f].r2, pm[f].r2, pm[f].r2 - pb[f].r2))
                .collect();
        }
    }
    // largest gain first; ties keep feature order
    ranked.sort_by(|x, y| y.3.total_cmp(&x.3));
    let mut top = String::from("layer,dimension,baseline,aligned,delta\n");
    for (f, b, m, d) in ranked.iter().take(a.top) {
        writeln!(
            top,
            "{},{},{},{},{}",
            a.layer,
            features.names[*f],
            num(*b),
            num(*m),
            num(*d)
        )
        .unwrap();
    }
    write_text(&a.out, "features.csv", &csv)?;
    write_text(&a.out, "top.csv", &top)?;
    run.path("data", &a.data)
        .path("model", &a.model)
        .path("baseline", &a.baseline)
        .set("layer", &a.layer)
        .set("top", a.top);
    run.write(&a.out)
}

/// Mean of `column` over the rows of `model` in an `eval eeg` summary.
fn summary_value(dir: &Path, model: &str, column: &str) -> CliResult<f64> {
    let path = dir.join("summary.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no column '{name}'", path.display())))
    };
    let (mcol, vcol) = (col("model")?, col(column)?);
    let values: Vec<f64> = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f.get(mcol) == Some(&model))
        .map(|f| {
            f.get(vcol)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Data(format!("{}: bad value row", path.display())))
        })
        .collect::<CliResult<_>>()?;
    if values.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no rows for model '{model}'",
            path.display()
        )));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn eval_stats(a: StatsArgs) -> CliResult<()> {
    if a.a.len() != a.b.len() {
        return Err(CliError::Usage(format!(
            "paired test needs equal set sizes, got {} and {}",
            a.a.len(),
            a.b.len()
        )));
    }
    if !matches!(a.column.as_str(), "window_mean" | "window_max") {
        return Err(CliError::Usage(format!("unknown column '{}'", a.column)));
    }
    let b_model = a.b_model.clone().unwrap_or_else(|| a.a_model.clone());
    let xs: Vec<f64> =
        a.a.iter()
            .map(|d| summary_value(d, &a.a_model, &a.column))
            .collect::<CliResult<_>>()?;
    let ys: Vec<f64> =
        a.b.iter()
            .map(|d| summary_value(d, &b_model, &a.column))
            .collect::<CliResult<_>>()?;
    let t = paired_t(&xs, &ys)?;
    prepare_out(&a.out, a.force)?;
    let mut run = RunManifest::new("eval stats");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let csv = format!(
        "comparison,column,n,mean_a,mean_b,mean_diff,t,df,p,d,degenerate\n{}-{},{},{},{},{},{},{},{},{},{},{}\n",
        a.a_model,
        b_model,
        a.column,
        t.n,
        num(mean(&xs)),
        num(mean(&ys)),
        num(t.mean),
        num(t.t),
        num(t.df),
        num(t.p),
        num(t.d),
        t.degenerate
    );
    write_text(&a.out, "stats.csv", &csv)?;
    run.set(
        "a",
        a.a.iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
    .set(
        "b",
        a.b.iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    run.write(&a.out)?;
    test_flag(&t)
}
