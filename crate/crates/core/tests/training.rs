//! Training runs on small synthetic datasets.

use eegalign_core::data::{average_repetitions, synth_generate, SynthConfig, SynthOutput};
use eegalign_core::diffcore::Graph;
use eegalign_core::losses::{classification_loss, pearson_value};
use eegalign_core::models::{AlignedModel, BackboneSpec};
use eegalign_core::rsa::{eeg_decoding_rdms, rsa_compare, DecodingConfig};
use eegalign_core::trainer::{pseudo_labels, train_alignment, AlignmentConfig, ControlMode};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data(seed: u64) -> SynthOutput {
    synth_generate(&SynthConfig {
        seed,
        subjects: 1,
        fmri_subjects: 0,
        fmri_counts: [0, 0, 0],
        ..SynthConfig::default()
    })
    .unwrap()
}

fn short(seed: u64, epochs: usize) -> AlignmentConfig {
    AlignmentConfig {
        epochs,
        seed,
        ..AlignmentConfig::default()
    }
}

#[test]
fn mse_falls_over_five_default_epochs() {
    let out = data(0);
    let ds = &out.train[0];
    let mut m = AlignedModel::new(BackboneSpec::default(), ds.eeg_dim(), 0).unwrap();
    let r = train_alignment(&mut m, ds, &short(0, 5), None).unwrap();
    assert_eq!(r.epochs.len(), 5);
    let (first, last) = (r.epochs[0].terms.mse, r.epochs[4].terms.mse);
    assert!(last < first, "mse {first} -> {last}");
}

#[test]
fn alignment_loss_falls_in_most_seeds() {
    let mut falls = 0;
    for seed in 0..5 {
        let out = data(seed);
        let ds = &out.train[0];
        let mut m = AlignedModel::new(BackboneSpec::default(), ds.eeg_dim(), seed).unwrap();
        let r = train_alignment(&mut m, ds, &short(seed, 5), None).unwrap();
        let (a, b) = (r.epochs[0].terms.total, r.epochs[4].terms.total);
        if b < a {
            falls += 1;
        }
    }
    assert!(falls >= 4, "L_A fell in {falls}/5 runs");
}

#[test]
fn teacher_loss_at_step_zero_is_below_uniform() {
    let out = data(1);
    let model = AlignedModel::new(BackboneSpec::default(), out.train[0].eeg_dim(), 1).unwrap();
    let images = &out.train[0].images;
    let labels = pseudo_labels(&model.backbone, images).unwrap();
    let mut g = Graph::new();
    let x = g.input(images.clone());
    let outs = model.forward(&mut g, x, false).unwrap();
    let l = classification_loss(&mut g, outs.logits, &labels).unwrap();
    assert!(g.value(l).item().unwrap() < (16f64).ln());
}

#[test]
fn beta_zero_head_stays_at_the_null() {
    let out = data(2);
    let ds = &out.train[0];
    let mut m = AlignedModel::new(BackboneSpec::default(), ds.eeg_dim(), 2).unwrap();
    let cfg = AlignmentConfig {
        beta: 0.0,
        ..short(2, 5)
    };
    train_alignment(&mut m, ds, &cfg, None).unwrap();

    let test = average_repetitions(&out.test[0]);
    let real = test.mean_vectors();
    let generated = m.generate(&test.images).unwrap();
    let n = test.n_images();
    let mean_abs_r = |perm: &[usize]| {
        (0..n)
            .map(|i| pearson_value(generated.row(i), real.row(perm[i])).abs())
            .sum::<f64>()
            / n as f64
    };
    let observed = mean_abs_r(&(0..n).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let null: Vec<f64> = (0..200)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            mean_abs_r(&p)
        })
        .collect();
    let mu = null.iter().sum::<f64>() / null.len() as f64;
    let sd = (null.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / null.len() as f64).sqrt();
    assert!(
        (observed - mu).abs() <= 2.0 * sd,
        "observed {observed}, null {mu} ± {sd}"
    );
}

#[test]
fn no_cont_report_recomposes_exactly() {
    let out = data(3);
    let ds = &out.train[0];
    let mut m = AlignedModel::new(BackboneSpec::default(), ds.eeg_dim(), 3).unwrap();
    let cfg = AlignmentConfig {
        control: ControlMode::NoCont,
        ..short(3, 2)
    };
    let r = train_alignment(&mut m, ds, &cfg, None).unwrap();
    for e in &r.epochs {
        let t = e.terms;
        assert!(t.contrastive > 0.0);
        assert_eq!(t.generation, t.mse);
        assert!((t.total - (t.classification + t.beta * t.mse)).abs() <= 1e-12 * t.total);
    }
}

#[test]
fn subjects_share_most_of_their_geometry() {
    let out = synth_generate(&SynthConfig {
        subjects: 2,
        fmri_subjects: 0,
        fmri_counts: [0, 0, 0],
        ..SynthConfig::default()
    })
    .unwrap();
    let ts: Vec<usize> = (8..14).collect();
    let cfg = DecodingConfig::default();
    let a = eeg_decoding_rdms(&out.test[0], &ts, 0, &cfg).unwrap();
    let b = eeg_decoding_rdms(&out.test[1], &ts, 0, &cfg).unwrap();
    let rho: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| rsa_compare(x, y).unwrap().rho)
        .sum::<f64>()
        / ts.len() as f64;
    assert!(rho > 0.3, "mean between-subject RSA {rho}");
}
