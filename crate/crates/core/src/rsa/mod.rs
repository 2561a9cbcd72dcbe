//! Representational similarity analysis.
//!
//! RDMs from model activations, fMRI patterns, feature scores and pairwise
//! EEG decoding; Spearman comparison over strict upper triangles; similarity
//! time courses and their summaries; variability across instances; partial
//! rank correlations; t-tests.

mod curves;
mod decoding;
mod export;
mod partial;
mod stats;

pub use curves::{
    cross_subject_matrix, improvement_stats, max_over_layers, similarity_timecourses, variability,
    window_mean, CrossSubject, Improvement, SimilarityCurve, VariabilityMatrix,
};
pub use decoding::{
    eeg_decoding_rdm, eeg_decoding_rdms, pair_seed, pair_split, DecodingConfig, LinearSvm,
};
pub use export::{curves_csv, rdm_records, variability_csv};
pub use partial::{feature_profile, partial_spearman_r2, PartialCorr, RIDGE_LAMBDA};
pub use stats::{
    ln_gamma, one_sample_t, paired_t, regularized_incomplete_beta, student_t_two_tailed, TTest,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RdmSource {
    Model,
    Eeg,
    Fmri,
    Feature,
}

impl RdmSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RdmSource::Model => "model",
            RdmSource::Eeg => "eeg",
            RdmSource::Fmri => "fmri",
            RdmSource::Feature => "feature",
        }
    }
}

/// Where an RDM came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: RdmSource,
    /// Layer, timepoint, ROI or feature dimension.
    pub tag: String,
    pub subject: Option<String>,
    /// Numerical caveats met while building it, e.g. constant rows.
    pub flags: Vec<String>,
}

impl Provenance {
    pub fn new(source: RdmSource, tag: impl Into<String>) -> Self {
        Provenance {
            source,
            tag: tag.into(),
            subject: None,
            flags: Vec::new(),
        }
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }
}

/// Square, symmetric dissimilarity matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm {
    n: usize,
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl Rdm {
    /// Checks symmetry, the zero diagonal and the value range implied by
    /// the source: `[0, 2]` for correlation distances, `[0, 1]` for
    /// decoding accuracies, non-negative for feature distances.
    pub fn new(n: usize, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::invalid(format!(
                "RDM needs n >= 2 and n*n values, got n={n} with {} values",
                values.len()
            )));
        }
        let hi = match provenance.source {
            RdmSource::Model | RdmSource::Fmri => 2.0,
            RdmSource::Eeg => 1.0,
            RdmSource::Feature => f64::INFINITY,
        };
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("RDM diagonal ({i},{i}) is not 0")));
            }
            for j in i + 1..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !a.is_finite() || (a - b).abs() >= 1e-12 {
                    return Err(Error::invalid(format!(
                        "RDM not symmetric/finite at ({i},{j}): {a} vs {b}"
                    )));
                }
                if !(0.0..=hi).contains(&a) {
                    return Err(Error::invalid(format!(
                        "{} RDM entry ({i},{j}) = {a} outside [0, {hi}]",
                        provenance.source.as_str()
                    )));
                }
            }
        }
        Ok(Rdm {
            n,
            values,
            provenance,
        })
    }

    /// Builds the matrix from a strict upper triangle in row-major order.
    pub fn from_upper(n: usize, upper: &[f64], provenance: Provenance) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::invalid(format!(
                "{} upper-triangle values do not fit n={n}",
                upper.len()
            )));
        }
        let mut v = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                v[i * n + j] = upper[k];
                v[j * n + i] = upper[k];
                k += 1;
            }
        }
        Rdm::new(n, v, provenance)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Strict upper triangle, row-major.
    pub fn upper(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i + 1..(i + 1) * n]);
        }
        out
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.n, self.n], self.values.clone()).expect("square")
    }
}

/// A correlation coefficient plus whether an input was constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    pub rho: f64,
    pub degenerate: bool,
}

/// Average (fractional) ranks starting at 1; ties share their mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation; a constant input gives 0 and `degenerate`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Rho> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!(
            "pearson needs equal lengths >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Rho {
            rho: 0.0,
            degenerate: true,
        });
    }
    Ok(Rho {
        rho: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Rho> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid(format!(
            "spearman needs equal lengths >= 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    pearson(&ranks(x), &ranks(y))
}

/// Spearman correlation of strict upper triangles.
pub fn rsa_compare(a: &Rdm, b: &Rdm) -> Result<Rho> {
    if a.n != b.n {
        return Err(Error::invalid(format!(
            "cannot compare RDMs over {} and {} stimuli",
            a.n, b.n
        )));
    }
    spearman(&a.upper(), &b.upper())
}

fn correlation_rdm(rows: &Tensor, provenance: Provenance) -> Result<Rdm> {
    let n = rows.shape().first().copied().unwrap_or(0);
    let p = rows.numel().checked_div(n).unwrap_or(0);
    if n < 3 || p < 2 {
        return Err(Error::invalid(format!(
            "correlation RDM needs n >= 3 rows of length >= 2, got {n} x {p}"
        )));
    }
    let mut prov = provenance;
    let mut unit = vec![0.0; n * p];
    let mut constant = vec![false; n];
    for i in 0..n {
        let row = rows.row(i);
        let mean = row.iter().sum::<f64>() / p as f64;
        let out = &mut unit[i * p..(i + 1) * p];
        for (o, &v) in out.iter_mut().zip(row) {
            *o = v - mean;
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) || norm == 0.0 {
            constant[i] = true;
            out.iter_mut().for_each(|v| *v = 0.0);
            prov.flags.push(format!("constant_row:{i}"));
        } else {
            out.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = if constant[i] || constant[j] {
                0.0
            } else {
                let a = &unit[i * p..(i + 1) * p];
                let b = &unit[j * p..(j + 1) * p];
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
            };
            let d = (1.0 - r).clamp(0.0, 2.0);
            v[i * n + j] = d;
            v[j * n + i] = d;
        }
    }
    Rdm::new(n, v, prov)
}

/// `1 − Pearson` between flattened activation vectors, one per stimulus
/// (the leading axis of `features`). A constant row is treated as
/// uncorrelated with everything and flagged.
pub fn model_rdm(features: &Tensor, tag: impl Into<String>) -> Result<Rdm> {
    correlation_rdm(features, Provenance::new(RdmSource::Model, tag))
}

/// One RDM per backbone stage, tagged with the stage name.
pub fn layer_rdms(model: &crate::models::MiniCor, images: &Tensor) -> Result<Vec<(String, Rdm)>> {
    let features = model.features(images)?;
    crate::models::Stage::ALL
        .iter()
        .zip(&features.stages)
        .map(|(stage, f)| Ok((stage.name().to_string(), model_rdm(f, stage.name())?)))
        .collect()
}

/// Same kernel as [`model_rdm`], over `n_images × voxels` beta patterns.
pub fn fmri_rdm(
    patterns: &Tensor,
    roi: impl Into<String>,
    subject: impl Into<String>,
) -> Result<Rdm> {
    correlation_rdm(
        patterns,
        Provenance::new(RdmSource::Fmri, roi).with_subject(subject),
    )
}

/// One RDM per feature dimension with entries `|e_i − e_j|`.
pub fn feature_rdms(embedding: &crate::data::FeatureEmbedding) -> Result<Vec<Rdm>> {
    let n = embedding.n_images();
    if n < 3 {
        return Err(Error::invalid(format!("feature RDMs need n >= 3, got {n}")));
    }
    (0..embedding.n_features())
        .map(|f| {
            let col = embedding.column(f);
            let mut prov = Provenance::new(RdmSource::Feature, embedding.names[f].clone());
            if col.iter().all(|&v| v == col[0]) {
                prov.flags.push("constant_dimension".into());
            }
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    v[i * n + j] = (col[i] - col[j]).abs();
                }
            }
            Rdm::new(n, v, prov)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::FeatureEmbedding;

    fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for k in 0..a.len() {
            num += (a[k] - ma) * (b[k] - mb);
            da += (a[k] - ma).powi(2);
            db += (b[k] - mb).powi(2);
        }
        num / (da.sqrt() * db.sqrt())
    }

    #[test]
    fn identical_rows_zero_rdm() {
        let row = [1.0, 5.0, 2.0, 0.5];
        let t = Tensor::new(vec![3, 4], row.repeat(3)).unwrap();
        let rdm = model_rdm(&t, "x").unwrap();
        assert!(rdm.upper().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn negated_row_distance_two() {
        let t = Tensor::new(
            vec![3, 3],
            vec![1.0, 2.0, 4.0, -1.0, -2.0, -4.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        assert!((model_rdm(&t, "x").unwrap().get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn model_and_fmri_rdm_match_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, p) in [(5, 10), (10, 250)] {
            let t = Tensor::uniform(&[n, p], -1.0, 1.0, &mut rng);
            let m = model_rdm(&t, "x").unwrap();
            let f = fmri_rdm(&t, "V1", "01").unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j {
                        0.0
                    } else {
                        1.0 - oracle_pearson(t.row(i), t.row(j))
                    };
                    assert!((m.get(i, j) - want).abs() < 1e-12);
                    assert_eq!(m.get(i, j), f.get(i, j));
                }
            }
            assert_eq!(f.provenance.source, RdmSource::Fmri);
        }
    }

    #[test]
    fn constant_row_is_flagged() {
        let t = Tensor::new(
            vec![3, 3],
            vec![1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 2.0, 0.0, 1.0],
        )
        .unwrap();
        let rdm = model_rdm(&t, "x").unwrap();
        assert_eq!(rdm.get(0, 1), 1.0);
        assert_eq!(rdm.provenance.flags, vec!["constant_row:0".to_string()]);
    }

    #[test]
    fn fmri_rdm_for_fifty_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = Tensor::uniform(&[50, 30], 0.0, 1.0, &mut rng);
        assert_eq!(fmri_rdm(&t, "LOC", "01").unwrap().n(), 50);
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&x, &x).unwrap().rho - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &y).unwrap().rho + 1.0).abs() < 1e-15);
        let c = spearman(&x, &[2.0; 5]).unwrap();
        assert!(c.degenerate && c.rho == 0.0);
        assert!(spearman(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn spearman_with_ties_matches_brute_force() {
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        // ranks by hand: x -> [1, 2.5, 2.5, 4], y -> [1, 3, 2, 4]
        let want = oracle_pearson(&[1.0, 2.5, 2.5, 4.0], &[1.0, 3.0, 2.0, 4.0]);
        assert!((spearman(&x, &y).unwrap().rho - want).abs() < 1e-12);
    }

    fn random_rdm(n: usize, rng: &mut ChaCha8Rng) -> Rdm {
        let upper: Vec<f64> = (0..n * (n - 1) / 2)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        Rdm::from_upper(n, &upper, Provenance::new(RdmSource::Eeg, "t")).unwrap()
    }

    #[test]
    fn rsa_compare_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_rdm(6, &mut rng);
        let b = random_rdm(6, &mut rng);
        assert_eq!(rsa_compare(&a, &a).unwrap().rho, 1.0);
        let sq = Rdm::new(
            6,
            a.values().iter().map(|v| v * v).collect(),
            a.provenance.clone(),
        )
        .unwrap();
        assert!((rsa_compare(&a, &sq).unwrap().rho - 1.0).abs() < 1e-15);
        let (ua, ub) = (a.upper(), b.upper());
        assert_eq!(ua.len(), 15);
        let want = oracle_pearson(&ranks(&ua), &ranks(&ub));
        assert!((rsa_compare(&a, &b).unwrap().rho - want).abs() < 1e-12);
        let c = random_rdm(5, &mut rng);
        assert!(rsa_compare(&a, &c).is_err());
    }

    #[test]
    fn rdm_invariants_enforced() {
        let p = || Provenance::new(RdmSource::Eeg, "t");
        assert!(Rdm::new(2, vec![0.0, 0.5, 0.4, 0.0], p()).is_err());
        assert!(Rdm::new(2, vec![0.1, 0.5, 0.5, 0.0], p()).is_err());
        assert!(Rdm::new(2, vec![0.0, 1.5, 1.5, 0.0], p()).is_err());
        assert!(Rdm::new(
            2,
            vec![0.0, 1.5, 1.5, 0.0],
            Provenance::new(RdmSource::Model, "l")
        )
        .is_ok());
    }

    #[test]
    fn feature_rdm_arithmetic() {
        let emb = FeatureEmbedding::new(
            vec!["a".into(), "flat".into()],
            Tensor::new(vec![3, 2], vec![0.0, 1.0, 1.0, 1.0, 3.0, 1.0]).unwrap(),
        )
        .unwrap();
        let rdms = feature_rdms(&emb).unwrap();
        assert_eq!(rdms[0].upper(), vec![1.0, 3.0, 2.0]);
        assert_eq!(rdms[0].provenance.tag, "a");
        assert!(rdms[1].upper().iter().all(|&v| v == 0.0));
        assert_eq!(
            rdms[1].provenance.flags,
            vec!["constant_dimension".to_string()]
        );
    }

    #[test]
    fn forty_nine_named_feature_rdms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let names: Vec<String> = (0..49).map(|f| format!("dim{f}")).collect();
        let emb =
            FeatureEmbedding::new(names.clone(), Tensor::uniform(&[6, 49], 0.0, 1.0, &mut rng))
                .unwrap();
        let rdms = feature_rdms(&emb).unwrap();
        assert_eq!(rdms.len(), 49);
        assert!(rdms.iter().zip(&names).all(|(r, n)| &r.provenance.tag == n));
    }
}
