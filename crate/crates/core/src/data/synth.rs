//! Synthetic subjects with a known ground truth.
//!
//! Every image is drawn from a vector of latents `z ∈ [-1, 1]^L` that sets
//! the parameters of a procedural pattern (hue, blob brightness, grating
//! frequency and contrast, blob position, ...). Nuisance factors such as grating
//! phase, background level and pixel noise vary per image but never reach
//! the brain signals.
//!
//! Subject `s` responds to image `i` with
//!
//! ```text
//! eeg[c, t] = gain · Σ_k A_s[c, k] · z_ik · h_sk(t) + σ · ε
//! ```
//!
//! where `A_s` blends a mixing matrix shared by all subjects with a
//! subject-specific one and scales each latent by a subject gain, and
//! `h_sk` is a biphasic temporal response that starts after 50 ms.
//!
//! fMRI voxels are Gaussian-tuned to subsets of the latents, one subset per
//! region of interest. The feature embedding lists the latents followed by
//! pure-noise distractor dimensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EegDataset, FeatureEmbedding, FmriDataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FMRI_ROIS: [&str; 5] = ["V1", "V2", "V3", "V4", "LOC"];
pub const FMRI_CATEGORIES: [&str; 3] = ["natural", "shape", "letter"];
const EEG_CATEGORIES: [&str; 4] = ["animal", "food", "tool", "vehicle"];
// Ordered from global to spatially local, so small latent counts drive
// properties that survive spatial pooling.
const LATENT_NAMES: [&str; 8] = [
    "hue",
    "brightness",
    "frequency",
    "contrast",
    "blob_size",
    "orientation",
    "blob_x",
    "blob_y",
];
const ONSET_MS: f64 = 50.0;

// RNG streams, so that changing one count does not reshuffle the rest.
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_FMRI_IMAGES: u64 = 3;
const STREAM_WORLD: u64 = 4;
const STREAM_FEATURES: u64 = 5;
const STREAM_EEG: u64 = 100;
const STREAM_FMRI: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub subjects: usize,
    pub latents: usize,
    pub channels: usize,
    pub timepoints: usize,
    pub timepoint_step_ms: f64,
    pub train_reps: usize,
    pub test_reps: usize,
    /// Per-trial EEG noise standard deviation.
    pub noise_sigma: f64,
    /// Scale of the latent-driven EEG signal.
    pub signal_gain: f64,
    /// Fraction of mixing variance shared by all subjects, in `[0, 1]`.
    pub shared_mixing: f64,
    /// Log-scale spread of the per-subject latent gains.
    pub gain_spread: f64,
    pub fmri_subjects: usize,
    /// Natural, shape and letter image counts.
    pub fmri_counts: [usize; 3],
    pub voxels: usize,
    pub fmri_noise: f64,
    pub features: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 32,
            n_test: 16,
            subjects: 4,
            latents: 4,
            channels: 17,
            timepoints: 20,
            timepoint_step_ms: 10.0,
            train_reps: 8,
            test_reps: 80,
            noise_sigma: 0.1,
            signal_gain: 0.1,
            shared_mixing: 0.5,
            gain_spread: 0.8,
            fmri_subjects: 3,
            fmri_counts: [50, 40, 10],
            voxels: 40,
            fmri_noise: 0.1,
            features: 49,
            image_size: 32,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.n_train + self.n_test < 8 || self.n_train < 2 || self.n_test < 2 {
            return bad(format!(
                "need at least 8 images with 2 per split, got {} train + {} test",
                self.n_train, self.n_test
            ));
        }
        if self.latents < 2 {
            return bad(format!("need at least 2 latents, got {}", self.latents));
        }
        if self.features < self.latents.max(2) {
            return bad(format!(
                "{} feature dimensions cannot hold {} latents",
                self.features, self.latents
            ));
        }
        if self.subjects == 0 || self.channels == 0 || self.timepoints == 0 {
            return bad("subjects, channels and timepoints must be positive".into());
        }
        if self.train_reps == 0 || self.test_reps == 0 || self.voxels == 0 {
            return bad("repetition and voxel counts must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.shared_mixing) {
            return bad(format!(
                "shared_mixing {} outside [0, 1]",
                self.shared_mixing
            ));
        }
        if self.noise_sigma < 0.0 || self.fmri_noise < 0.0 || self.signal_gain < 0.0 {
            return bad("noise levels and gain must be non-negative".into());
        }
        if self.image_size < 8 {
            return bad(format!("image size {} too small", self.image_size));
        }
        Ok(())
    }

    pub fn timepoints_ms(&self) -> Vec<f64> {
        (0..self.timepoints)
            .map(|t| t as f64 * self.timepoint_step_ms)
            .collect()
    }
}

/// The hidden generative parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub latents: usize,
    pub signal_gain: f64,
    /// Per subject, `channels × L`, latent gains folded in.
    pub mixing: Vec<Tensor>,
    /// Per subject, one gain per latent.
    pub gains: Vec<Vec<f64>>,
    /// Per subject EEG noise level.
    pub noise_sigma: Vec<f64>,
    /// Per subject, `L × timepoints` temporal responses.
    pub temporal: Vec<Tensor>,
    /// Latent indices read by each fMRI region.
    pub roi_latents: Vec<(String, Vec<usize>)>,
    /// Extra image patterns driven by latents beyond the eighth.
    overlays: Vec<Vec<f64>>,
}

impl SynthWorld {
    /// Noise-free EEG of `subject` for latents `z`, channel-major.
    pub fn clean_eeg(&self, subject: usize, z: &[f64]) -> Vec<f64> {
        let a = &self.mixing[subject];
        let h = &self.temporal[subject];
        let (c_n, t_n) = (a.shape()[0], h.shape()[1]);
        let mut out = vec![0.0; c_n * t_n];
        for c in 0..c_n {
            let row = &mut out[c * t_n..(c + 1) * t_n];
            for (k, &zk) in z.iter().enumerate() {
                let w = self.signal_gain * a.data()[c * self.latents + k] * zk;
                for (o, &hv) in row.iter_mut().zip(h.row(k)) {
                    *o += w * hv;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub config: SynthConfig,
    pub world: SynthWorld,
    /// Per subject, raw trials.
    pub train: Vec<EegDataset>,
    pub test: Vec<EegDataset>,
    pub train_latents: Tensor,
    pub test_latents: Tensor,
    pub fmri_images: Tensor,
    pub fmri_latents: Tensor,
    pub fmri: Vec<FmriDataset>,
    /// Over the test images.
    pub features: FeatureEmbedding,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Rounds to the nearest f32, so that f32 files round-trip exactly.
fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

pub fn latent_name(k: usize) -> String {
    LATENT_NAMES
        .get(k)
        .map_or_else(|| format!("pattern_{k}"), |s| s.to_string())
}

/// Style of the rendered image. Natural images carry every nuisance factor;
/// shapes are clean; letters are clean with dark strokes on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Style {
    Natural,
    Shape,
    Letter,
}

fn render<R: Rng>(
    z: &[f64],
    style: Style,
    size: usize,
    overlays: &[Vec<f64>],
    rng: &mut R,
) -> Vec<f64> {
    use std::f64::consts::PI;
    // The first eight parameters come from latents when present and are
    // drawn at random otherwise.
    let mut p = [0.0; 8];
    for (k, slot) in p.iter_mut().enumerate() {
        *slot = z
            .get(k)
            .copied()
            .unwrap_or_else(|| rng.random_range(-1.0..1.0));
    }
    let clean = style != Style::Natural;
    let phase = if clean {
        0.0
    } else {
        rng.random_range(0.0..2.0 * PI)
    };
    let background = if clean {
        0.0
    } else {
        rng.random_range(-0.15..0.15)
    };
    let pixel_noise = if clean { 0.0 } else { 0.03 };

    let s = size as f64;
    let tint = [0.15 * p[0], 0.0, -0.15 * p[0]];
    let brightness = 0.45 + 0.3 * p[1];
    let freq = 2.0 + 1.5 * (1.0 + p[2]);
    let contrast = 0.3 + 0.15 * p[3];
    let radius = s * (0.12 + 0.05 * p[4]);
    let theta = p[5] * PI / 3.0;
    let (bx, by) = (s / 2.0 + 0.3 * s * p[6], s / 2.0 + 0.3 * s * p[7]);
    let (ct, st) = (theta.cos(), theta.sin());

    let plane = size * size;
    let mut img = vec![0.0; 3 * plane];
    for y in 0..size {
        for x in 0..size {
            let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
            let u = (xf * ct + yf * st) / s;
            let grating = (2.0 * PI * freq * u + phase).sin();
            let d2 = (xf - bx).powi(2) + (yf - by).powi(2);
            let blob = (-d2 / (2.0 * radius * radius)).exp();
            for (c, &shift) in tint.iter().enumerate() {
                let base = 0.5 + background + shift + contrast * grating;
                img[c * plane + y * size + x] = base * (1.0 - blob) + brightness * blob;
            }
        }
    }
    for (k, pattern) in overlays.iter().enumerate() {
        let zk = z[8 + k];
        for (v, &q) in img.iter_mut().zip(pattern) {
            *v += 0.2 * zk * q;
        }
    }
    if style == Style::Letter {
        // two or three dark bars
        let bars = rng.random_range(2..=3);
        for _ in 0..bars {
            let horizontal = rng.random_bool(0.5);
            let at = rng.random_range(size / 5..size - size / 5);
            let from = rng.random_range(0..size / 3);
            let to = rng.random_range(2 * size / 3..size);
            let half = (size / 16).max(1);
            for a in from..to {
                for b in at.saturating_sub(half)..(at + half).min(size) {
                    let (x, y) = if horizontal { (a, b) } else { (b, a) };
                    for c in 0..3 {
                        img[c * plane + y * size + x] = 0.05;
                    }
                }
            }
        }
    }
    if pixel_noise > 0.0 {
        for v in img.iter_mut() {
            *v += pixel_noise * normal(rng);
        }
    }
    img.into_iter().map(f32_exact).collect()
}

fn sample_latents<R: Rng>(n: usize, l: usize, rng: &mut R) -> Vec<f64> {
    (0..n * l)
        .map(|_| f32_exact(rng.random_range(-1.0..1.0)))
        .collect()
}

fn render_set<R: Rng>(
    latents: &[f64],
    l: usize,
    styles: &[Style],
    size: usize,
    overlays: &[Vec<f64>],
    rng: &mut R,
) -> Result<Tensor> {
    let mut data = Vec::with_capacity(styles.len() * 3 * size * size);
    for (i, &style) in styles.iter().enumerate() {
        data.extend(render(
            &latents[i * l..(i + 1) * l],
            style,
            size,
            overlays,
            rng,
        ));
    }
    Tensor::new(vec![styles.len(), 3, size, size], data)
}

/// Biphasic response: a positive lobe at `mu`, a wider negative lobe 35 ms
/// later, zero before stimulus onset plus 50 ms, zero mean over the rest.
fn temporal_response(times: &[f64], mu: f64) -> Vec<f64> {
    let bump = |t: f64, m: f64, w: f64| (-(t - m).powi(2) / (2.0 * w * w)).exp();
    let mut h: Vec<f64> = times
        .iter()
        .map(|&t| {
            if t < ONSET_MS {
                0.0
            } else {
                bump(t, mu, 12.0) - 0.7 * bump(t, mu + 35.0, 18.0)
            }
        })
        .collect();
    let active: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= ONSET_MS).collect();
    if active.len() > 1 {
        let mean = active.iter().map(|&i| h[i]).sum::<f64>() / active.len() as f64;
        for &i in &active {
            h[i] -= mean;
        }
    }
    let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in h.iter_mut() {
            *v /= peak;
        }
    }
    h
}

fn roi_assignment(l: usize) -> Vec<(String, Vec<usize>)> {
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); FMRI_ROIS.len()];
    for k in 0..l {
        sets[k % 4].push(k);
    }
    FMRI_ROIS
        .iter()
        .zip(sets)
        .map(|(name, set)| {
            let set = if set.is_empty() || *name == "LOC" {
                (0..l).collect()
            } else {
                set
            };
            (name.to_string(), set)
        })
        .collect()
}

fn build_world(cfg: &SynthConfig) -> SynthWorld {
    let mut rng = stream(cfg.seed, STREAM_WORLD);
    let (l, c_n) = (cfg.latents, cfg.channels);
    let times = cfg.timepoints_ms();
    let shared: Vec<f64> = (0..c_n * l).map(|_| normal(&mut rng)).collect();
    let (ws, wu) = (cfg.shared_mixing.sqrt(), (1.0 - cfg.shared_mixing).sqrt());

    let mut mixing = Vec::new();
    let mut gains = Vec::new();
    let mut temporal = Vec::new();
    for _ in 0..cfg.subjects {
        let mut g: Vec<f64> = (0..l)
            .map(|_| (cfg.gain_spread * normal(&mut rng)).exp())
            .collect();
        let rms = (g.iter().map(|v| v * v).sum::<f64>() / l as f64).sqrt();
        g.iter_mut().for_each(|v| *v /= rms);
        let a: Vec<f64> = (0..c_n * l)
            .map(|i| (ws * shared[i] + wu * normal(&mut rng)) * g[i % l])
            .collect();
        let mut h = Vec::with_capacity(l * times.len());
        for k in 0..l {
            let base = 70.0 + 70.0 * k as f64 / (l - 1) as f64;
            let jitter = rng.random_range(-10.0..10.0);
            h.extend(temporal_response(&times, base + jitter));
        }
        mixing.push(Tensor::new(vec![c_n, l], a).expect("mixing shape"));
        temporal.push(Tensor::new(vec![l, times.len()], h).expect("temporal shape"));
        gains.push(g);
    }

    let plane = 3 * cfg.image_size * cfg.image_size;
    let overlays = (8..l)
        .map(|_| {
            // a smooth random pattern: sum of three random plane waves
            let waves: Vec<[f64; 4]> = (0..3)
                .map(|_| {
                    [
                        rng.random_range(0.0..std::f64::consts::PI),
                        rng.random_range(1.0..4.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect();
            let s = cfg.image_size;
            (0..plane)
                .map(|idx| {
                    let (c, y, x) = (idx / (s * s), (idx / s) % s, idx % s);
                    waves
                        .iter()
                        .map(|&[th, f, ph, w]| {
                            let u = (x as f64 * th.cos() + y as f64 * th.sin()) / s as f64;
                            w * (std::f64::consts::TAU * f * u + ph + c as f64).sin()
                        })
                        .sum::<f64>()
                        / 3.0
                })
                .collect()
        })
        .collect();

    SynthWorld {
        latents: l,
        signal_gain: cfg.signal_gain,
        mixing,
        gains,
        noise_sigma: vec![cfg.noise_sigma; cfg.subjects],
        temporal,
        roi_latents: roi_assignment(l),
        overlays,
    }
}

fn eeg_trials<R: Rng>(
    world: &SynthWorld,
    subject: usize,
    latents: &[f64],
    reps: usize,
    shape: (usize, usize),
    rng: &mut R,
) -> Result<Tensor> {
    let l = world.latents;
    let n = latents.len() / l;
    let sigma = world.noise_sigma[subject];
    let mut data = Vec::with_capacity(n * reps * shape.0 * shape.1);
    for i in 0..n {
        let clean = world.clean_eeg(subject, &latents[i * l..(i + 1) * l]);
        for _ in 0..reps {
            data.extend(clean.iter().map(|&v| f32_exact(v + sigma * normal(rng))));
        }
    }
    Tensor::new(vec![n, reps, shape.0, shape.1], data)
}

fn category_of(z: &[f64]) -> String {
    EEG_CATEGORIES[usize::from(z[0] > 0.0) * 2 + usize::from(z[1] > 0.0)].to_string()
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let l = cfg.latents;
    let world = build_world(cfg);
    let size = cfg.image_size;

    let mut rng_tr = stream(cfg.seed, STREAM_TRAIN);
    let mut rng_te = stream(cfg.seed, STREAM_TEST);
    let z_train = sample_latents(cfg.n_train, l, &mut rng_tr);
    let z_test = sample_latents(cfg.n_test, l, &mut rng_te);
    let train_images = render_set(
        &z_train,
        l,
        &vec![Style::Natural; cfg.n_train],
        size,
        &world.overlays,
        &mut rng_tr,
    )?;
    let test_images = render_set(
        &z_test,
        l,
        &vec![Style::Natural; cfg.n_test],
        size,
        &world.overlays,
        &mut rng_te,
    )?;
    // Each image is its own concept; numbering continues across splits.
    let concepts = |offset: usize, n: usize| -> Vec<String> {
        (offset..offset + n)
            .map(|i| format!("concept_{i:04}"))
            .collect()
    };
    let categories = |z: &[f64], n: usize| -> Vec<String> {
        (0..n)
            .map(|i| category_of(&z[i * l..(i + 1) * l]))
            .collect()
    };
    let times = cfg.timepoints_ms();

    let mut train = Vec::with_capacity(cfg.subjects);
    let mut test = Vec::with_capacity(cfg.subjects);
    for s in 0..cfg.subjects {
        let mut rng = stream(cfg.seed, STREAM_EEG + s as u64);
        let dims = (cfg.channels, cfg.timepoints);
        let subject = format!("{:02}", s + 1);
        train.push(EegDataset::new(
            subject.clone(),
            Split::Train,
            train_images.clone(),
            eeg_trials(&world, s, &z_train, cfg.train_reps, dims, &mut rng)?,
            concepts(0, cfg.n_train),
            categories(&z_train, cfg.n_train),
            times.clone(),
        )?);
        test.push(EegDataset::new(
            subject,
            Split::Test,
            test_images.clone(),
            eeg_trials(&world, s, &z_test, cfg.test_reps, dims, &mut rng)?,
            concepts(cfg.n_train, cfg.n_test),
            categories(&z_test, cfg.n_test),
            times.clone(),
        )?);
    }

    let mut rng_f = stream(cfg.seed, STREAM_FMRI_IMAGES);
    let styles: Vec<Style> = [Style::Natural, Style::Shape, Style::Letter]
        .iter()
        .zip(cfg.fmri_counts)
        .flat_map(|(&st, n)| std::iter::repeat_n(st, n))
        .collect();
    let fmri_categories: Vec<String> = FMRI_CATEGORIES
        .iter()
        .zip(cfg.fmri_counts)
        .flat_map(|(&c, n)| std::iter::repeat_n(c.to_string(), n))
        .collect();
    let n_fmri = styles.len();
    let z_fmri = sample_latents(n_fmri, l, &mut rng_f);
    let fmri_images = if n_fmri > 0 {
        render_set(&z_fmri, l, &styles, size, &world.overlays, &mut rng_f)?
    } else {
        Tensor::zeros(&[1, 3, size, size])
    };

    let mut fmri = Vec::with_capacity(cfg.fmri_subjects);
    if n_fmri > 0 {
        for f in 0..cfg.fmri_subjects {
            let mut rng = stream(cfg.seed, STREAM_FMRI + f as u64);
            let mut rois = Vec::new();
            for (name, set) in &world.roi_latents {
                let tuning: Vec<(Vec<f64>, f64, f64)> = (0..cfg.voxels)
                    .map(|_| {
                        let pref = set.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                        (pref, rng.random_range(0.5..0.9), rng.random_range(0.5..1.5))
                    })
                    .collect();
                let mut data = Vec::with_capacity(n_fmri * cfg.voxels);
                for i in 0..n_fmri {
                    let z = &z_fmri[i * l..(i + 1) * l];
                    for (pref, width, amp) in &tuning {
                        let d2: f64 = set.iter().zip(pref).map(|(&k, p)| (z[k] - p).powi(2)).sum();
                        let v = amp * (-d2 / (2.0 * width * width)).exp()
                            + cfg.fmri_noise * normal(&mut rng);
                        data.push(f32_exact(v));
                    }
                }
                rois.push((name.clone(), Tensor::new(vec![n_fmri, cfg.voxels], data)?));
            }
            fmri.push(FmriDataset {
                subject: format!("{:02}", f + 1),
                rois,
                categories: fmri_categories.clone(),
            });
        }
    }

    let mut rng_feat = stream(cfg.seed, STREAM_FEATURES);
    let mut names: Vec<String> = (0..l).map(latent_name).collect();
    names.extend((l..cfg.features).map(|j| format!("distractor_{j:02}")));
    let mut fv = Vec::with_capacity(cfg.n_test * cfg.features);
    for i in 0..cfg.n_test {
        fv.extend_from_slice(&z_test[i * l..(i + 1) * l]);
        fv.extend((l..cfg.features).map(|_| f32_exact(normal(&mut rng_feat))));
    }
    let features = FeatureEmbedding::new(names, Tensor::new(vec![cfg.n_test, cfg.features], fv)?)?;

    Ok(SynthOutput {
        config: cfg.clone(),
        world,
        train,
        test,
        train_latents: Tensor::new(vec![cfg.n_train, l], z_train)?,
        test_latents: Tensor::new(vec![cfg.n_test, l], z_test)?,
        fmri_images,
        fmri_latents: if n_fmri > 0 {
            Tensor::new(vec![n_fmri, l], z_fmri)?
        } else {
            Tensor::zeros(&[1, l])
        },
        fmri,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split_integrity;

    fn small() -> SynthConfig {
        SynthConfig {
            n_train: 8,
            n_test: 4,
            subjects: 2,
            train_reps: 2,
            test_reps: 3,
            fmri_counts: [3, 2, 1],
            voxels: 5,
            fmri_subjects: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = synth_generate(&small()).unwrap();
        let b = synth_generate(&small()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.fmri, b.fmri);
        assert_eq!(a.features, b.features);
        let mut other = small();
        other.seed = 1;
        assert_ne!(synth_generate(&other).unwrap().train[0].eeg, a.train[0].eeg);
    }

    #[test]
    fn shapes_and_disjoint_concepts() {
        let out = synth_generate(&small()).unwrap();
        assert_eq!(out.train.len(), 2);
        assert_eq!(out.train[0].eeg.shape(), &[8, 2, 17, 20]);
        assert_eq!(out.test[1].eeg.shape(), &[4, 3, 17, 20]);
        assert_eq!(out.train[0].images.shape(), &[8, 3, 32, 32]);
        assert_eq!(out.fmri[0].rois.len(), 5);
        assert_eq!(out.fmri[0].roi("LOC").unwrap().shape(), &[6, 5]);
        assert_eq!(out.features.n_features(), 49);
        assert_eq!(out.features.names[0], "hue");
        split_integrity(&out.train[0].concepts, &out.test[0].concepts).unwrap();
    }

    #[test]
    fn subjects_share_images_but_not_mixing() {
        let out = synth_generate(&small()).unwrap();
        assert_eq!(out.train[0].images, out.train[1].images);
        assert_ne!(out.world.mixing[0], out.world.mixing[1]);
    }

    #[test]
    fn equal_latents_equal_clean_eeg() {
        let out = synth_generate(&small()).unwrap();
        let z = [0.3, -0.2, 0.9, 0.1];
        assert_eq!(out.world.clean_eeg(0, &z), out.world.clean_eeg(0, &z));
        let mut cfg = small();
        cfg.noise_sigma = 0.0;
        let out = synth_generate(&cfg).unwrap();
        let z0 = out.train_latents.row(0);
        let direct = out.world.clean_eeg(0, z0);
        for (a, b) in out.train[0].trial(0, 1).iter().zip(&direct) {
            assert_eq!(*a, f32_exact(*b));
        }
    }

    #[test]
    fn eeg_is_silent_before_onset() {
        let mut cfg = small();
        cfg.noise_sigma = 0.0;
        let out = synth_generate(&cfg).unwrap();
        let t_n = cfg.timepoints;
        let trial = out.train[0].trial(3, 0);
        for c in 0..cfg.channels {
            for t in 0..5 {
                assert_eq!(trial[c * t_n + t], 0.0);
            }
        }
        assert!(trial.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn roi_latent_sets() {
        let r = roi_assignment(4);
        assert_eq!(r[0].1, vec![0]);
        assert_eq!(r[3].1, vec![3]);
        assert_eq!(r[4].1, vec![0, 1, 2, 3]);
        let r = roi_assignment(2);
        assert_eq!(r[1].1, vec![1]);
        assert_eq!(r[2].1, vec![0, 1]);
        let r = roi_assignment(6);
        assert_eq!(r[0].1, vec![0, 4]);
    }

    #[test]
    fn many_latents_render() {
        let mut cfg = small();
        cfg.latents = 10;
        let out = synth_generate(&cfg).unwrap();
        assert!(out.train[0].images.is_finite());
        assert_eq!(out.features.names[9], "pattern_9");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small();
        cfg.latents = 1;
        assert!(synth_generate(&cfg).is_err());
        let mut cfg = small();
        cfg.n_train = 3;
        cfg.n_test = 2;
        assert!(synth_generate(&cfg).is_err());
    }
}
