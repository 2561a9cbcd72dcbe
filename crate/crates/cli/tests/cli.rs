use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eegalign_core::models::{save_checkpoint, AlignedModel, BackboneSpec};
use tempfile::TempDir;

fn eegalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegalign"))
        .args(args)
        .output()
        .expect("spawn eegalign")
}

fn ok(args: &[&str]) {
    let out = eegalign(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    eegalign(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// Tiny dataset: 8 train images, 12 test images (66 pairs, enough for
/// the 49 feature RDMs), 2 subjects.
fn small_data(dir: &TempDir) -> PathBuf {
    let d = dir.path().join("data");
    ok(&[
        "synth",
        "--out",
        s(&d),
        "--images",
        "8",
        "--test-images",
        "12",
        "--subjects",
        "2",
        "--train-reps",
        "2",
        "--test-reps",
        "10",
    ]);
    d
}

fn quick_train(data: &Path, subject: &str, out: &Path, extra: &[&str]) {
    let mut args = vec![
        "train",
        "--data",
        s(data),
        "--subject",
        subject,
        "--epochs",
        "2",
        "--batch",
        "4",
        "--lr",
        "1e-4",
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

fn manifest_value(dir: &Path, key: &str) -> Option<String> {
    read(dir.join("manifest.txt"))
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(String::from))
}

fn csv_rows(p: impl AsRef<Path>) -> (String, Vec<Vec<String>>) {
    let text = read(p);
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn synth_writes_the_expected_layout() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    for f in [
        "images.rtf",
        "labels.csv",
        "latents.rtf",
        "features.rtf",
        "features.txt",
        "manifest.txt",
        "eeg_sub-01.rtf",
        "eeg_sub-02.rtf",
        "fmri_sub-01.rtf",
    ] {
        assert!(d.join(f).is_file(), "missing {f}");
    }
    assert_eq!(manifest_value(&d, "eeg_subjects").as_deref(), Some("01,02"));
    assert_eq!(manifest_value(&d, "command").as_deref(), Some("synth"));
}

#[test]
fn synth_subject_count_follows_the_flag() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().join("ten");
    ok(&[
        "synth",
        "--out",
        s(&d),
        "--images",
        "4",
        "--test-images",
        "4",
        "--subjects",
        "10",
    ]);
    let eeg = fs::read_dir(&d)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("eeg_sub-")
        })
        .count();
    assert_eq!(eeg, 10);
}

#[test]
fn synth_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&[
            "synth",
            "--out",
            s(d),
            "--images",
            "6",
            "--test-images",
            "4",
            "--seed",
            "3",
        ]);
    }
    for e in fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        if name == "manifest.txt" {
            continue;
        }
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap()
        );
    }
}

#[test]
fn non_empty_output_needs_force() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    assert_eq!(code(&["synth", "--out", s(&d), "--images", "8"]), 2);
    ok(&[
        "synth",
        "--out",
        s(&d),
        "--images",
        "8",
        "--test-images",
        "12",
        "--force",
    ]);
    assert_eq!(manifest_value(&d, "train_images").as_deref(), Some("8"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let out = dir.path().join("m");
    let base = [
        "train",
        "--data",
        s(&d),
        "--subject",
        "01",
        "--out",
        s(&out),
    ];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        code(&v)
    };
    assert_eq!(with(&["--control", "shuffled"]), 2);
    assert_eq!(with(&["--beta", "-1"]), 2);
    assert_eq!(with(&["--batch", "0"]), 2);
    assert_eq!(code(&["train", "--data", s(&d), "--out", s(&out)]), 2);
    assert_eq!(code(&["--jobs", "0", "synth", "--out", s(&out)]), 2);
}

#[test]
fn unknown_subject_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let out = dir.path().join("m");
    assert_eq!(
        code(&[
            "train",
            "--data",
            s(&d),
            "--subject",
            "07",
            "--out",
            s(&out)
        ]),
        3
    );
    let missing = dir.path().join("nowhere");
    assert_eq!(
        code(&[
            "train",
            "--data",
            s(&missing),
            "--subject",
            "01",
            "--out",
            s(&out)
        ]),
        3
    );
}

#[test]
fn beta_zero_report_is_pure_classification() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let m = dir.path().join("m");
    quick_train(&d, "01", &m, &["--beta", "0"]);
    let (header, rows) = csv_rows(m.join("report.csv"));
    assert_eq!(header, "epoch,l_c,l_mse,l_cont,l_g,l_a,beta");
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r[1], r[5], "l_a should equal l_c");
        assert_eq!(r[6], "0");
    }
}

#[test]
fn controls_record_their_seed() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let m = dir.path().join("scr");
    quick_train(&d, "01", &m, &["--control", "scrambled"]);
    assert_eq!(manifest_value(&m, "control").as_deref(), Some("scrambled"));
    assert!(manifest_value(&m, "control_seed").is_some());

    let plain = dir.path().join("plain");
    quick_train(&d, "01", &plain, &[]);
    assert!(manifest_value(&plain, "control_seed").is_none());
}

#[test]
fn subjects_give_distinct_checkpoints() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    quick_train(&d, "01", &a, &[]);
    quick_train(&d, "02", &b, &[]);
    assert_ne!(
        fs::read(a.join("model.rtf")).unwrap(),
        fs::read(b.join("model.rtf")).unwrap()
    );

    let pooled = dir.path().join("pooled");
    ok(&[
        "train",
        "--data",
        s(&d),
        "--across-subjects",
        "--epochs",
        "1",
        "--batch",
        "4",
        "--out",
        s(&pooled),
    ]);
    assert_eq!(
        manifest_value(&pooled, "pooling").as_deref(),
        Some("across_subject")
    );
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let cfg = dir.path().join("train.cfg");
    fs::write(&cfg, "beta=5\nepochs=1\nbatch=4\n").unwrap();
    let m = dir.path().join("m");
    ok(&[
        "train",
        "--data",
        s(&d),
        "--subject",
        "01",
        "--config",
        s(&cfg),
        "--beta",
        "7",
        "--out",
        s(&m),
    ]);
    assert_eq!(manifest_value(&m, "beta").as_deref(), Some("7"));
    assert_eq!(manifest_value(&m, "epochs").as_deref(), Some("1"));
    assert_eq!(manifest_value(&m, "lr").as_deref(), Some("0.00002"));

    fs::write(&cfg, "betta=5\n").unwrap();
    let m2 = dir.path().join("m2");
    assert_eq!(
        code(&[
            "train",
            "--data",
            s(&d),
            "--subject",
            "01",
            "--config",
            s(&cfg),
            "--out",
            s(&m2)
        ]),
        2
    );
}

#[test]
fn exclude_label_shrinks_the_training_set() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let labels = read(d.join("labels.csv"));
    let first = labels
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(2))
        .expect("a train label")
        .to_string();
    let m = dir.path().join("m");
    quick_train(&d, "01", &m, &["--exclude-label", &first]);
    let removed: usize = manifest_value(&m, "removed_images")
        .unwrap()
        .parse()
        .unwrap();
    let kept: usize = manifest_value(&m, "train_images").unwrap().parse().unwrap();
    assert!(removed >= 1);
    assert_eq!(kept + removed, 8);
}

#[test]
fn eval_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let base = dir.path().join("base");
    ok(&["init", "--data", s(&d), "--out", s(&base)]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    quick_train(&d, "01", &a, &[]);
    quick_train(&d, "02", &b, &[]);

    let eeg = dir.path().join("eeg");
    ok(&[
        "eval",
        "eeg",
        "--data",
        s(&d),
        "--model",
        s(&a),
        "--baseline",
        s(&base),
        "--subject",
        "01",
        "--out",
        s(&eeg),
    ]);
    let (h, rows) = csv_rows(eeg.join("improvement.csv"));
    assert_eq!(h, "subject,layer,peak_ms,baseline,aligned,delta,ratio");
    let layers: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(layers, ["V1", "V2", "V4", "IT", "max"]);
    let (h, rows) = csv_rows(eeg.join("summary.csv"));
    assert_eq!(h, "subject,model,window_mean,window_max");
    assert_eq!(rows.len(), 2);
    assert!(eeg.join("curves.csv").is_file() && eeg.join("eeg_rdms.rtf").is_file());

    let eeg_b = dir.path().join("eeg_b");
    ok(&[
        "eval",
        "eeg",
        "--data",
        s(&d),
        "--model",
        s(&b),
        "--baseline",
        s(&base),
        "--subject",
        "02",
        "--out",
        s(&eeg_b),
    ]);
    let st = dir.path().join("stats");
    ok(&[
        "eval",
        "stats",
        "--a",
        s(&eeg),
        "--a",
        s(&eeg_b),
        "--b",
        s(&eeg),
        "--b",
        s(&eeg_b),
        "--b-model",
        "baseline",
        "--out",
        s(&st),
    ]);
    let (h, rows) = csv_rows(st.join("stats.csv"));
    assert_eq!(
        h,
        "comparison,column,n,mean_a,mean_b,mean_diff,t,df,p,d,degenerate"
    );
    assert_eq!(rows[0][2], "2");

    let fm = dir.path().join("fmri");
    ok(&[
        "eval",
        "fmri",
        "--data",
        s(&d),
        "--model",
        s(&a),
        "--baseline",
        s(&base),
        "--out",
        s(&fm),
    ]);
    let (h, _) = csv_rows(fm.join("fmri.csv"));
    assert_eq!(h, "subject,model,roi,layer,rho");
    let (_, rows) = csv_rows(fm.join("fmri_summary.csv"));
    assert!(rows.iter().any(|r| r[0] == "baseline"));

    let var = dir.path().join("var");
    ok(&[
        "eval",
        "variability",
        "--data",
        s(&d),
        "--model",
        s(&a),
        "--model",
        s(&b),
        "--out",
        s(&var),
    ]);
    assert!(read(var.join("variability.csv")).contains("IT"));

    let cs = dir.path().join("cs");
    let c = code(&[
        "eval",
        "cross-subject",
        "--data",
        s(&d),
        "--model",
        s(&a),
        "--model",
        s(&b),
        "--baseline",
        s(&base),
        "--out",
        s(&cs),
    ]);
    assert!(c == 0 || c == 4, "cross-subject exit {c}");
    let (h, rows) = csv_rows(cs.join("cross_subject.csv"));
    assert_eq!(h, "model,subject,rho,minus_baseline,normalized");
    assert_eq!(rows.len(), 4);

    let feat = dir.path().join("feat");
    ok(&[
        "eval",
        "features",
        "--data",
        s(&d),
        "--model",
        s(&a),
        "--baseline",
        s(&base),
        "--top",
        "3",
        "--out",
        s(&feat),
    ]);
    let (h, rows) = csv_rows(feat.join("top.csv"));
    assert_eq!(h, "layer,dimension,baseline,aligned,delta");
    assert_eq!(rows.len(), 3);
    let (h, _) = csv_rows(feat.join("features.csv"));
    assert_eq!(h, "layer,dimension,model,partial_r2,r,ridge,degenerate");
}

#[test]
fn stats_on_identical_runs_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let base = dir.path().join("base");
    ok(&["init", "--data", s(&d), "--out", s(&base)]);
    let eeg = dir.path().join("eeg");
    ok(&[
        "eval",
        "eeg",
        "--data",
        s(&d),
        "--model",
        s(&base),
        "--baseline",
        s(&base),
        "--subject",
        "01",
        "--out",
        s(&eeg),
    ]);
    let st = dir.path().join("st");
    assert_eq!(
        code(&[
            "eval",
            "stats",
            "--a",
            s(&eeg),
            "--a",
            s(&eeg),
            "--b",
            s(&eeg),
            "--b",
            s(&eeg),
            "--b-model",
            "baseline",
            "--out",
            s(&st),
        ]),
        4
    );
}

#[test]
fn mismatched_model_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let d = small_data(&dir);
    let spec = BackboneSpec {
        input: [3, 16, 16],
        ..BackboneSpec::default()
    };
    let small = dir.path().join("small");
    fs::create_dir_all(&small).unwrap();
    save_checkpoint(&AlignedModel::new(spec, 340, 0).unwrap(), &small).unwrap();
    let out = dir.path().join("eeg");
    assert_eq!(
        code(&[
            "eval",
            "eeg",
            "--data",
            s(&d),
            "--model",
            s(&small),
            "--baseline",
            s(&small),
            "--subject",
            "01",
            "--out",
            s(&out),
        ]),
        3
    );
}
