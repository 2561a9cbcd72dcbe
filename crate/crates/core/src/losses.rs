//! Composite alignment loss: classification cross-entropy plus a weighted
//! EEG generation loss made of an MSE term and a Pearson contrastive term.
//!
//! All builders record onto a [`Graph`] so the result is differentiable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{finite_difference_check, GradCheck, Graph, NodeId};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Added to each centered norm inside Pearson correlations.
pub const PEARSON_EPS: f64 = 1e-8;

/// Which parts of the generation loss enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossAblation {
    pub use_mse: bool,
    pub use_contrastive: bool,
}

impl Default for LossAblation {
    fn default() -> Self {
        LossAblation {
            use_mse: true,
            use_contrastive: true,
        }
    }
}

/// Scalar values of every loss term for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentLossTerms {
    pub classification: f64,
    pub mse: f64,
    pub contrastive: f64,
    pub generation: f64,
    pub total: f64,
    pub beta: f64,
}

impl AlignmentLossTerms {
    /// `classification + beta * generation`, recomputed from the parts.
    pub fn reconstruct_total(&self) -> f64 {
        self.classification + self.beta * self.generation
    }
}

/// Graph handles for each loss term.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentLossNodes {
    pub classification: NodeId,
    pub mse: NodeId,
    pub contrastive: NodeId,
    pub generation: NodeId,
    pub total: NodeId,
    pub beta: f64,
}

impl AlignmentLossNodes {
    pub fn terms(&self, g: &Graph) -> AlignmentLossTerms {
        let v = |id: NodeId| g.value(id).data()[0];
        AlignmentLossTerms {
            classification: v(self.classification),
            mse: v(self.mse),
            contrastive: v(self.contrastive),
            generation: v(self.generation),
            total: v(self.total),
            beta: self.beta,
        }
    }
}

/// Batch-mean categorical cross-entropy of `logits` (N x K) against `labels`.
pub fn classification_loss(g: &mut Graph, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
    g.softmax_cross_entropy(logits, labels)
}

/// `(1/N) Σᵢ mean_d (Sᵢ,d − Ŝᵢ,d)²`.
pub fn mse_loss(g: &mut Graph, generated: NodeId, real: NodeId) -> Result<NodeId> {
    g.mse(generated, real)
}

/// Differentiable Pearson correlation between two `[D]` vectors.
pub fn pearson_r(g: &mut Graph, x: NodeId, y: NodeId) -> Result<NodeId> {
    let dx = g.value(x).numel();
    let dy = g.value(y).numel();
    if g.value(x).rank() != 1 || g.value(y).rank() != 1 || dx != dy {
        return Err(Error::shape(
            "pearson_r",
            format!(
                "expects two equal-length vectors, got {:?} and {:?}",
                g.value(x).shape(),
                g.value(y).shape()
            ),
        ));
    }
    let xr = g.reshape(x, &[1, dx])?;
    let yr = g.reshape(y, &[1, dy])?;
    let r = g.pearson_matrix(xr, yr, PEARSON_EPS)?;
    g.reshape(r, &[1])
}

/// Pearson correlation of two slices with the same epsilon guard, clamped
/// to `[-1, 1]` for reporting.
pub fn pearson_value(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / ((sxx.sqrt() + PEARSON_EPS) * (syy.sqrt() + PEARSON_EPS))).clamp(-1.0, 1.0)
}

/// `1 + (1/N) Σᵢ [1 − r(Sᵢ, Ŝᵢ)] − (1/(N(N−1))) Σᵢ Σ_{j≠i} [1 − r(Sᵢ, Ŝⱼ)]`
/// with `S` the generated rows and `Ŝ` the real rows.
pub fn contrastive_loss(g: &mut Graph, generated: NodeId, real: NodeId) -> Result<NodeId> {
    let shape = g.value(generated).shape().to_vec();
    if shape.len() != 2 || g.value(real).shape() != shape.as_slice() {
        return Err(Error::shape(
            "contrastive_loss",
            format!(
                "generated {:?} and real {:?} must both be N x D",
                shape,
                g.value(real).shape()
            ),
        ));
    }
    let n = shape[0];
    if n < 2 {
        return Err(Error::invalid(
            "contrastive loss needs at least 2 samples for negative pairs",
        ));
    }
    let r = g.pearson_matrix(generated, real, PEARSON_EPS)?;
    // The constant 1 − 1 + 1 collapses to one leading 1; what remains is a
    // weighted sum of correlations: −1/N on positives, +1/(N(N−1)) on negatives.
    let pos = -1.0 / n as f64;
    let neg = 1.0 / (n * (n - 1)) as f64;
    let mut w = Tensor::full(&[n, n], neg);
    for i in 0..n {
        w.data_mut()[i * n + i] = pos;
    }
    let w = g.input(w);
    let weighted = g.mul(r, w)?;
    let s = g.sum(weighted)?;
    g.add_scalar(s, 1.0)
}

/// Builds `L_A = L_C + β (L_MSE + L_Cont)`, honouring `ablation`.
///
/// The contrastive and MSE terms are always computed and reported; an
/// ablated term is just left out of `L_G`.
pub fn alignment_loss(
    g: &mut Graph,
    logits: NodeId,
    labels: &[usize],
    generated: NodeId,
    real: NodeId,
    beta: f64,
    ablation: LossAblation,
) -> Result<AlignmentLossNodes> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    let n = g.value(logits).shape()[0];
    if labels.len() != n || g.value(generated).shape()[0] != n || g.value(real).shape()[0] != n {
        return Err(Error::shape(
            "alignment_loss",
            format!(
                "batch sizes differ: logits {n}, labels {}, generated {}, real {}",
                labels.len(),
                g.value(generated).shape()[0],
                g.value(real).shape()[0]
            ),
        ));
    }
    let classification = classification_loss(g, logits, labels)?;
    let mse = mse_loss(g, generated, real)?;
    let contrastive = contrastive_loss(g, generated, real)?;
    let generation = match (ablation.use_mse, ablation.use_contrastive) {
        (true, true) => g.add(mse, contrastive)?,
        (true, false) => g.scale(mse, 1.0)?,
        (false, true) => g.scale(contrastive, 1.0)?,
        (false, false) => {
            return Err(Error::invalid(
                "ablation removes both generation terms; use beta = 0 instead",
            ))
        }
    };
    let weighted = g.scale(generation, beta)?;
    let total = g.add(classification, weighted)?;
    Ok(AlignmentLossNodes {
        classification,
        mse,
        contrastive,
        generation,
        total,
        beta,
    })
}

/// Finite-difference checks of every loss builder on random inputs drawn
/// from `seed`, including the full composite on a 2-sample batch.
pub fn gradient_checks(seed: u64) -> Result<Vec<(&'static str, GradCheck)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |shape: &[usize]| Tensor::uniform(shape, -1.0, 1.0, &mut rng);
    let (logits, gen, real) = (u(&[2, 5]), u(&[2, 7]), u(&[2, 7]));
    let (x, y) = (u(&[9]), u(&[9]));
    let labels = [(seed % 5) as usize, ((seed / 5) % 5) as usize];
    let h = 1e-5;
    let mut out = vec![
        (
            "pearson_r",
            finite_difference_check(&[x, y], h, |g, ids| pearson_r(g, ids[0], ids[1]))?,
        ),
        (
            "classification",
            finite_difference_check(std::slice::from_ref(&logits), h, |g, ids| {
                classification_loss(g, ids[0], &labels)
            })?,
        ),
        (
            "mse",
            finite_difference_check(&[gen.clone(), real.clone()], h, |g, ids| {
                mse_loss(g, ids[0], ids[1])
            })?,
        ),
        (
            "contrastive",
            finite_difference_check(&[gen.clone(), real.clone()], h, |g, ids| {
                contrastive_loss(g, ids[0], ids[1])
            })?,
        ),
    ];
    for (name, ablation) in [
        ("alignment", LossAblation::default()),
        (
            "alignment_no_cont",
            LossAblation {
                use_mse: true,
                use_contrastive: false,
            },
        ),
    ] {
        let check =
            finite_difference_check(&[logits.clone(), gen.clone(), real.clone()], h, |g, ids| {
                Ok(alignment_loss(g, ids[0], &labels, ids[1], ids[2], 100.0, ablation)?.total)
            })?;
        out.push((name, check));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn value(g: &Graph, id: NodeId) -> f64 {
        g.value(id).data()[0]
    }

    fn mat(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    /// Loop Pearson with the same norm guard.
    fn pearson_loop(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
        let dy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
        num / ((dx + PEARSON_EPS) * (dy + PEARSON_EPS))
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let mut g = Graph::new();
        let logits = g.input(Tensor::full(&[3, 4], 0.7));
        let l = classification_loss(&mut g, logits, &[0, 1, 3]).unwrap();
        assert!((value(&g, l) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_drive_loss_to_zero() {
        let mut last = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 50.0] {
            let mut g = Graph::new();
            let logits = g.input(mat(2, 3, vec![margin, 0.0, 0.0, 0.0, 0.0, margin]));
            let l = {
                let id = classification_loss(&mut g, logits, &[0, 2]).unwrap();
                value(&g, id)
            };
            assert!(l < last);
            last = l;
        }
        assert!(last < 1e-20);
    }

    #[test]
    fn cross_entropy_matches_direct_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let logits = Tensor::uniform(&[3, 5], -3.0, 3.0, &mut rng);
        let labels = [4usize, 0, 2];
        let mut expected = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = logits.row(r);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            expected -= (row[y].exp() / z).ln();
        }
        expected /= 3.0;
        let mut g = Graph::new();
        let l = g.input(logits);
        let got = {
            let id = classification_loss(&mut g, l, &labels).unwrap();
            value(&g, id)
        };
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn mse_hand_cases() {
        let mut g = Graph::new();
        let a = g.input(mat(1, 2, vec![1.0, 3.0]));
        let z = g.input(Tensor::zeros(&[1, 2]));
        assert_eq!(
            {
                let id = mse_loss(&mut g, a, z).unwrap();
                value(&g, id)
            },
            5.0
        );
        assert_eq!(
            {
                let id = mse_loss(&mut g, a, a).unwrap();
                value(&g, id)
            },
            0.0
        );
        let bad = g.input(Tensor::zeros(&[2, 1]));
        assert!(mse_loss(&mut g, a, bad).is_err());
    }

    #[test]
    fn mse_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (4, 7);
        let a = Tensor::uniform(&[n, d], -2.0, 2.0, &mut rng);
        let b = Tensor::uniform(&[n, d], -2.0, 2.0, &mut rng);
        let mut expected = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for k in 0..d {
                row += (a.row(i)[k] - b.row(i)[k]).powi(2);
            }
            expected += row / d as f64;
        }
        expected /= n as f64;
        let mut g = Graph::new();
        let (ai, bi) = (g.input(a), g.input(b));
        let ab = {
            let id = mse_loss(&mut g, ai, bi).unwrap();
            value(&g, id)
        };
        let ba = {
            let id = mse_loss(&mut g, bi, ai).unwrap();
            value(&g, id)
        };
        assert!((ab - expected).abs() < 1e-12);
        assert_eq!(ab, ba);
    }

    #[test]
    fn pearson_identity_and_negation() {
        let x = vec![0.3, -1.2, 2.5, 0.0, 4.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut g = Graph::new();
        let xi = g.input(Tensor::from_vec(x));
        let ni = g.input(Tensor::from_vec(neg));
        let same = pearson_r(&mut g, xi, xi).unwrap();
        let opp = pearson_r(&mut g, xi, ni).unwrap();
        assert!((value(&g, same) - 1.0).abs() < 1e-6);
        assert!((value(&g, opp) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn pearson_constant_vector_is_finite_zero() {
        let mut g = Graph::new();
        let c = g.param(Tensor::full(&[6], 2.0));
        let y = g.input(Tensor::from_vec(vec![1.0, 2.0, 0.0, 5.0, 3.0, 1.0]));
        let r = pearson_r(&mut g, c, y).unwrap();
        assert!(value(&g, r).abs() < 1e-12);
        let grads = g.backward(r).unwrap();
        assert!(grads.get(c).unwrap().is_finite());
    }

    #[test]
    fn contrastive_trivial_cases() {
        // every row identical and generated == real: loss = 1 + 0 - 0
        let row = [1.0, -2.0, 0.5, 3.0];
        let same: Vec<f64> = row.iter().chain(&row).chain(&row).copied().collect();
        let mut g = Graph::new();
        let a = g.input(mat(3, 4, same));
        let l = contrastive_loss(&mut g, a, a).unwrap();
        assert!((value(&g, l) - 1.0).abs() < 1e-10);

        // two mutually uncorrelated rows, generated == real: 1 + 0 - (1+1)/2.
        // Large norms keep the epsilon's pull on r(x, x) below 1e-10.
        let mut g = Graph::new();
        let a =
            g.input(mat(2, 4, vec![1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]).map(|v| v * 1e3));
        let l = contrastive_loss(&mut g, a, a).unwrap();
        assert!(value(&g, l).abs() < 1e-10);
    }

    #[test]
    fn contrastive_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, d) = (4, 10);
        let s = Tensor::uniform(&[n, d], -1.0, 1.0, &mut rng);
        let h = Tensor::uniform(&[n, d], -1.0, 1.0, &mut rng);
        let mut pos = 0.0;
        let mut neg = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = 1.0 - pearson_loop(s.row(i), h.row(j));
                if i == j {
                    pos += d;
                } else {
                    neg += d;
                }
            }
        }
        let expected = 1.0 + pos / n as f64 - neg / (n * (n - 1)) as f64;
        let mut g = Graph::new();
        let (si, hi) = (g.input(s), g.input(h));
        let l = contrastive_loss(&mut g, si, hi).unwrap();
        assert!((value(&g, l) - expected).abs() < 1e-10);
    }

    #[test]
    fn contrastive_needs_pairs() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(&[1, 5]));
        assert!(contrastive_loss(&mut g, a, a).is_err());
    }

    #[test]
    fn contrastive_is_scale_invariant_per_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = Tensor::uniform(&[3, 12], -1.0, 1.0, &mut rng);
        let h = Tensor::uniform(&[3, 12], -1.0, 1.0, &mut rng);
        let mut scaled = s.clone();
        let k: f64 = rng.random_range(0.1..10.0);
        for v in &mut scaled.data_mut()[12..24] {
            *v *= k;
        }
        let mut g = Graph::new();
        let (si, ci, hi) = (g.input(s), g.input(scaled), g.input(h));
        let a = contrastive_loss(&mut g, si, hi).unwrap();
        let b = contrastive_loss(&mut g, ci, hi).unwrap();
        assert!((value(&g, a) - value(&g, b)).abs() < 1e-6);
    }

    #[test]
    fn beta_weighting_and_ablation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let logits = Tensor::uniform(&[3, 4], -1.0, 1.0, &mut rng);
        let gen = Tensor::uniform(&[3, 6], -1.0, 1.0, &mut rng);
        let real = Tensor::uniform(&[3, 6], -1.0, 1.0, &mut rng);
        let labels = [0, 3, 1];
        let run = |beta: f64, ablation: LossAblation| {
            let mut g = Graph::new();
            let (l, s, r) = (
                g.input(logits.clone()),
                g.input(gen.clone()),
                g.input(real.clone()),
            );
            alignment_loss(&mut g, l, &labels, s, r, beta, ablation).map(|nodes| nodes.terms(&g))
        };

        let zero = run(0.0, LossAblation::default()).unwrap();
        assert_eq!(zero.total, zero.classification);

        let full = run(100.0, LossAblation::default()).unwrap();
        assert_eq!(full.generation, full.mse + full.contrastive);
        assert_eq!(full.total, full.reconstruct_total());

        let no_cont = run(
            100.0,
            LossAblation {
                use_mse: true,
                use_contrastive: false,
            },
        )
        .unwrap();
        assert_eq!(no_cont.generation, no_cont.mse);
        assert_eq!(no_cont.contrastive, full.contrastive);
        assert_eq!(no_cont.total, no_cont.classification + 100.0 * no_cont.mse);

        let no_mse = run(
            100.0,
            LossAblation {
                use_mse: false,
                use_contrastive: true,
            },
        )
        .unwrap();
        assert_eq!(no_mse.generation, no_mse.contrastive);
        assert_eq!(no_mse.total, no_mse.reconstruct_total());

        assert!(run(-1.0, LossAblation::default()).is_err());
    }

    #[test]
    fn reconstruct_total_arithmetic() {
        let terms = AlignmentLossTerms {
            classification: 1.0,
            mse: 0.5,
            contrastive: 0.25,
            generation: 0.75,
            total: 76.0,
            beta: 100.0,
        };
        assert_eq!(terms.reconstruct_total(), 76.0);
    }
}
