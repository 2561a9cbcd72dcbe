//! Similarity time courses and the summaries built on them.

use super::stats::{paired_t, TTest};
use super::{rsa_compare, spearman, Rdm};
use crate::error::{Error, Result};

/// Spearman RSA between one model layer and one subject, per timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCurve {
    pub layer: String,
    pub subject: String,
    pub model: String,
    pub timepoints_ms: Vec<f64>,
    pub rho: Vec<f64>,
}

/// One curve per layer plus the pointwise maximum across layers.
pub fn similarity_timecourses(
    layers: &[(String, Rdm)],
    eeg: &[Rdm],
    timepoints_ms: &[f64],
    subject: &str,
    model: &str,
) -> Result<(Vec<SimilarityCurve>, SimilarityCurve)> {
    if eeg.len() != timepoints_ms.len() {
        return Err(Error::invalid(format!(
            "{} EEG RDMs for {} timepoints",
            eeg.len(),
            timepoints_ms.len()
        )));
    }
    let curves = layers
        .iter()
        .map(|(name, rdm)| {
            let rho = eeg
                .iter()
                .map(|e| rsa_compare(rdm, e).map(|r| r.rho))
                .collect::<Result<Vec<_>>>()?;
            Ok(SimilarityCurve {
                layer: name.clone(),
                subject: subject.to_owned(),
                model: model.to_owned(),
                timepoints_ms: timepoints_ms.to_vec(),
                rho,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = max_over_layers(&curves)?;
    Ok((curves, max))
}

/// Pointwise maximum across layers, labelled `max`.
pub fn max_over_layers(curves: &[SimilarityCurve]) -> Result<SimilarityCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::invalid("max over an empty set of layers"))?;
    if curves.iter().any(|c| c.rho.len() != first.rho.len()) {
        return Err(Error::invalid("layer curves differ in length"));
    }
    let rho = (0..first.rho.len())
        .map(|t| {
            curves
                .iter()
                .map(|c| c.rho[t])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(SimilarityCurve {
        layer: "max".into(),
        rho,
        ..first.clone()
    })
}

/// Mean RSA over all given curves and the timepoints inside
/// `[lo_ms, hi_ms]`.
pub fn window_mean(curves: &[SimilarityCurve], lo_ms: f64, hi_ms: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in curves {
        for (&t, &r) in c.timepoints_ms.iter().zip(&c.rho) {
            if t >= lo_ms && t <= hi_ms {
                sum += r;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::invalid(format!(
            "no timepoints inside the {lo_ms}-{hi_ms} ms window"
        )));
    }
    Ok(sum / count as f64)
}

/// Change at the baseline's peak timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub layer: String,
    pub peak_index: usize,
    pub peak_ms: f64,
    pub baseline: f64,
    pub aligned: f64,
    pub delta: f64,
    /// `delta / baseline`; `None` when the baseline peak is not positive.
    pub ratio: Option<f64>,
}

/// The peak is the baseline's argmax (earliest on ties).
pub fn improvement_stats(
    aligned: &SimilarityCurve,
    baseline: &SimilarityCurve,
) -> Result<Improvement> {
    if aligned.rho.len() != baseline.rho.len() || aligned.timepoints_ms != baseline.timepoints_ms {
        return Err(Error::invalid(
            "aligned and baseline curves use different timepoints",
        ));
    }
    let mut peak = 0;
    for (t, &r) in baseline.rho.iter().enumerate() {
        if r > baseline.rho[peak] {
            peak = t;
        }
    }
    let (b, a) = (baseline.rho[peak], aligned.rho[peak]);
    let delta = a - b;
    Ok(Improvement {
        layer: baseline.layer.clone(),
        peak_index: peak,
        peak_ms: baseline.timepoints_ms[peak],
        baseline: b,
        aligned: a,
        delta,
        ratio: (b > 0.0).then(|| delta / b),
    })
}

/// Models (rows, model `i` tuned to subject `i`) × subjects (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSubject {
    pub matrix: Vec<Vec<f64>>,
    /// Each column minus the baseline model's value for that subject.
    pub minus_baseline: Vec<Vec<f64>>,
    /// Each column divided by its maximum.
    pub column_normalized: Vec<Vec<f64>>,
    /// Per subject: matched cell.
    pub matched: Vec<f64>,
    /// Per subject: mean of the other models' cells.
    pub mismatched: Vec<f64>,
    /// Paired test of matched against mismatched.
    pub test: TTest,
}

/// `cells[i][j]` is the window-mean RSA of model `i` with subject `j`;
/// `baseline[j]` that of the untrained model.
pub fn cross_subject_matrix(cells: &[Vec<f64>], baseline: &[f64]) -> Result<CrossSubject> {
    let m = cells.len();
    if m < 2 || cells.iter().any(|row| row.len() != m) || baseline.len() != m {
        return Err(Error::invalid(format!(
            "cross-subject analysis needs a square matrix of at least 2 and a baseline row, got {m} rows"
        )));
    }
    let minus_baseline = cells
        .iter()
        .map(|row| row.iter().zip(baseline).map(|(v, b)| v - b).collect())
        .collect();
    let col_max: Vec<f64> = (0..m)
        .map(|j| cells.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let column_normalized = cells
        .iter()
        .map(|row| row.iter().zip(&col_max).map(|(v, mx)| v / mx).collect())
        .collect();
    let matched: Vec<f64> = (0..m).map(|j| cells[j][j]).collect();
    let mismatched: Vec<f64> = (0..m)
        .map(|j| (0..m).filter(|&i| i != j).map(|i| cells[i][j]).sum::<f64>() / (m - 1) as f64)
        .collect();
    let test = paired_t(&matched, &mismatched)?;
    Ok(CrossSubject {
        matrix: cells.to_vec(),
        minus_baseline,
        column_normalized,
        matched,
        mismatched,
        test,
    })
}

/// Pairwise `1 − Spearman` between instances at one layer or ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct VariabilityMatrix {
    pub tag: String,
    pub labels: Vec<String>,
    /// Row-major `m × m`.
    pub values: Vec<f64>,
    /// Mean over unordered pairs.
    pub index: f64,
}

impl VariabilityMatrix {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size() + j]
    }
}

pub fn variability(tag: &str, labels: &[String], rdms: &[Rdm]) -> Result<VariabilityMatrix> {
    let m = rdms.len();
    if m < 2 || labels.len() != m {
        return Err(Error::invalid(format!(
            "variability needs >= 2 labelled RDMs, got {m} RDMs and {} labels",
            labels.len()
        )));
    }
    let uppers: Vec<Vec<f64>> = rdms.iter().map(Rdm::upper).collect();
    if uppers.iter().any(|u| u.len() != uppers[0].len()) {
        return Err(Error::invalid("variability RDMs differ in size"));
    }
    let mut values = vec![0.0; m * m];
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let v = if uppers[i] == uppers[j] {
                0.0
            } else {
                (1.0 - spearman(&uppers[i], &uppers[j])?.rho).clamp(0.0, 2.0)
            };
            values[i * m + j] = v;
            values[j * m + i] = v;
            sum += v;
        }
    }
    Ok(VariabilityMatrix {
        tag: tag.to_owned(),
        labels: labels.to_vec(),
        values,
        index: sum / (m * (m - 1) / 2) as f64,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::rsa::{Provenance, RdmSource};

    fn curve(layer: &str, rho: &[f64]) -> SimilarityCurve {
        SimilarityCurve {
            layer: layer.into(),
            subject: "01".into(),
            model: "m".into(),
            timepoints_ms: (0..rho.len()).map(|t| 10.0 * t as f64).collect(),
            rho: rho.to_vec(),
        }
    }

    fn rdm(upper: &[f64], n: usize) -> Rdm {
        Rdm::from_upper(n, upper, Provenance::new(RdmSource::Model, "l")).unwrap()
    }

    #[test]
    fn max_curve_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let curves: Vec<SimilarityCurve> = ["a", "b", "c"]
            .iter()
            .map(|l| {
                curve(
                    l,
                    &(0..6)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let max = max_over_layers(&curves).unwrap();
        for t in 0..6 {
            let brute = curves.iter().map(|c| c.rho[t]).fold(f64::MIN, f64::max);
            assert_eq!(max.rho[t], brute);
            assert!(curves.iter().all(|c| c.rho[t] <= max.rho[t]));
        }
        let single = max_over_layers(&curves[..1]).unwrap();
        assert_eq!(single.rho, curves[0].rho);
    }

    #[test]
    fn timecourses_against_rdms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eeg: Vec<Rdm> = (0..4)
            .map(|_| {
                let u: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
                Rdm::from_upper(5, &u, Provenance::new(RdmSource::Eeg, "t")).unwrap()
            })
            .collect();
        let layers = vec![("V1".to_string(), eeg[2].clone())];
        let (curves, max) =
            similarity_timecourses(&layers, &eeg, &[0.0, 10.0, 20.0, 30.0], "01", "m").unwrap();
        assert_eq!(curves[0].rho[2], 1.0);
        assert_eq!(max.rho, curves[0].rho);
    }

    #[test]
    fn improvement_arithmetic() {
        let base = curve("IT", &[0.02, 0.10, 0.05]);
        let same = improvement_stats(&base, &base).unwrap();
        assert_eq!((same.delta, same.ratio), (0.0, Some(0.0)));
        let aligned = curve("IT", &[0.0, 0.14, 0.3]);
        let imp = improvement_stats(&aligned, &base).unwrap();
        assert_eq!(imp.peak_index, 1);
        assert!((imp.delta - 0.04).abs() < 1e-15);
        assert!((imp.ratio.unwrap() - 0.4).abs() < 1e-12);
        let tie = improvement_stats(&aligned, &curve("IT", &[0.2, 0.1, 0.2])).unwrap();
        assert_eq!(tie.peak_index, 0);
        let neg = improvement_stats(&aligned, &curve("IT", &[-0.2, -0.1, -0.3])).unwrap();
        assert_eq!(neg.ratio, None);
    }

    #[test]
    fn window_mean_and_empty_window() {
        let c = curve("V1", &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            window_mean(std::slice::from_ref(&c), 10.0, 20.0).unwrap(),
            2.5
        );
        assert!(window_mean(&[c], 50.0, 200.0).is_err());
    }

    #[test]
    fn flat_cross_subject_is_degenerate() {
        let cells = vec![vec![0.3; 3]; 3];
        let cs = cross_subject_matrix(&cells, &[0.3; 3]).unwrap();
        assert!(cs.column_normalized.iter().flatten().all(|&v| v == 1.0));
        assert!(cs.minus_baseline.iter().flatten().all(|&v| v == 0.0));
        assert!(cs.test.degenerate);
    }

    #[test]
    fn diagonal_dominance_is_significant() {
        let cells: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        if i == j {
                            0.5 + 0.01 * j as f64
                        } else {
                            0.2 + 0.013 * ((i * 3 + j) % 5) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let cs = cross_subject_matrix(&cells, &[0.1; 4]).unwrap();
        assert!(cs.test.t > 0.0 && cs.test.p < 0.05, "{:?}", cs.test);
    }

    #[test]
    fn variability_cases() {
        let a = rdm(&[0.1, 0.5, 0.3, 0.9, 0.2, 0.4], 4);
        let rev = rdm(&[0.9, 0.5, 0.7, 0.1, 0.8, 0.6], 4);
        let labels: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let same = variability("IT", &labels[..2], &[a.clone(), a.clone()]).unwrap();
        assert_eq!(same.index, 0.0);
        let opp = variability("IT", &labels[..2], &[a.clone(), rev.clone()]).unwrap();
        assert!((opp.get(0, 1) - 2.0).abs() < 1e-12);

        let b = rdm(&[0.2, 0.1, 0.3, 0.6, 0.5, 0.4], 4);
        let three = variability("IT", &labels, &[a.clone(), rev.clone(), b.clone()]).unwrap();
        let d = |x: &Rdm, y: &Rdm| 1.0 - spearman(&x.upper(), &y.upper()).unwrap().rho;
        let want = (d(&a, &rev) + d(&a, &b) + d(&rev, &b)) / 3.0;
        assert!((three.index - want).abs() < 1e-12);
        assert_eq!(three.get(2, 0), three.get(0, 2));
    }
}
