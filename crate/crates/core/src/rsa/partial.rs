//! Partial rank correlation between a model RDM and one feature RDM,
//! controlling for a set of other RDMs.

use nalgebra::{DMatrix, DVector};

use super::{ranks, Rdm};
use crate::error::{Error, Result};

/// Ridge strength used when the control design is rank deficient.
pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialCorr {
    /// Signed partial correlation.
    pub r: f64,
    pub r2: f64,
    /// The controls were collinear; residuals come from a ridge fit.
    pub ridge: bool,
    /// A residual vector vanished; `r` is reported as 0.
    pub degenerate: bool,
}

/// Least-squares residuals of `y` on `x` (which includes the intercept).
/// Returns `(residuals, used_ridge)`.
fn residuals(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let full_rank = (0..k).all(|i| r[(i, i)].abs() > 1e-10 * diag_max.max(1.0));
    if full_rank {
        let qty = qr.q().transpose() * y;
        let beta = r
            .solve_upper_triangular(&qty)
            .expect("full-rank triangular solve");
        (y - x * beta, false)
    } else {
        let xtx = x.transpose() * x + DMatrix::identity(k, k) * RIDGE_LAMBDA;
        let xty = x.transpose() * y;
        let beta = xtx
            .cholesky()
            .expect("ridge system is positive definite")
            .solve(&xty);
        (y - x * beta, true)
    }
}

/// Rank-transforms all upper triangles, regresses the model and target
/// ranks on the control ranks (with intercept) and correlates the two
/// residual vectors.
pub fn partial_spearman_r2(model: &Rdm, target: &Rdm, controls: &[&Rdm]) -> Result<PartialCorr> {
    let n = model.n();
    if target.n() != n || controls.iter().any(|c| c.n() != n) {
        return Err(Error::invalid(
            "partial correlation needs RDMs over the same stimuli",
        ));
    }
    let m = n * (n - 1) / 2;
    if m < controls.len() + 3 {
        return Err(Error::invalid(format!(
            "{m} stimulus pairs cannot support {} controls",
            controls.len()
        )));
    }
    let mut x = DMatrix::from_element(m, controls.len() + 1, 1.0);
    for (c, rdm) in controls.iter().enumerate() {
        x.set_column(c + 1, &DVector::from_vec(ranks(&rdm.upper())));
    }
    let ym = DVector::from_vec(ranks(&model.upper()));
    let yt = DVector::from_vec(ranks(&target.upper()));
    let (em, ridge_m) = residuals(&x, &ym);
    let (et, ridge_t) = residuals(&x, &yt);
    let ridge = ridge_m || ridge_t;

    // Residuals are orthogonal to the intercept, so they are centred.
    let (nm, nt) = (em.norm(), et.norm());
    let scale = |y: &DVector<f64>| {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt()
    };
    let tiny = |norm: f64, y: &DVector<f64>| norm <= 1e-9 * scale(y).max(1.0);
    if tiny(nm, &ym) || tiny(nt, &yt) {
        return Ok(PartialCorr {
            r: 0.0,
            r2: 0.0,
            ridge,
            degenerate: true,
        });
    }
    let r = (em.dot(&et) / (nm * nt)).clamp(-1.0, 1.0);
    Ok(PartialCorr {
        r,
        r2: r * r,
        ridge,
        degenerate: false,
    })
}

/// Partial r² of `model` with every feature RDM, each controlling for all
/// the others. Runs in parallel over features.
pub fn feature_profile(model: &Rdm, features: &[Rdm]) -> Result<Vec<PartialCorr>> {
    use rayon::prelude::*;
    (0..features.len())
        .into_par_iter()
        .map(|f| {
            let controls: Vec<&Rdm> = features
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != f)
                .map(|(_, r)| r)
                .collect();
            partial_spearman_r2(model, &features[f], &controls)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::rsa::{spearman, Provenance, RdmSource};

    fn rdm(upper: &[f64], n: usize) -> Rdm {
        Rdm::from_upper(n, upper, Provenance::new(RdmSource::Feature, "f")).unwrap()
    }

    fn random_upper(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..m).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    #[test]
    fn no_controls_is_spearman_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (random_upper(21, &mut rng), random_upper(21, &mut rng));
        let p = partial_spearman_r2(&rdm(&a, 7), &rdm(&b, 7), &[]).unwrap();
        let s = spearman(&a, &b).unwrap().rho;
        assert!((p.r - s).abs() < 1e-12);
        assert!((p.r2 - s * s).abs() < 1e-12);
    }

    #[test]
    fn target_equal_to_a_control_is_explained_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = rdm(&random_upper(28, &mut rng), 8);
        let target = random_upper(28, &mut rng);
        // monotone transform: identical ranks
        let control = rdm(&target.iter().map(|v| v * v + 1.0).collect::<Vec<_>>(), 8);
        let other = rdm(&random_upper(28, &mut rng), 8);
        let p = partial_spearman_r2(&model, &rdm(&target, 8), &[&control, &other]).unwrap();
        assert!(p.r.abs() < 1e-6);
    }

    #[test]
    fn collinear_controls_use_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = rdm(&random_upper(15, &mut rng), 6);
        let model = rdm(&random_upper(15, &mut rng), 6);
        let target = rdm(&random_upper(15, &mut rng), 6);
        let p = partial_spearman_r2(&model, &target, &[&c, &c]).unwrap();
        assert!(p.ridge);
        let q = partial_spearman_r2(&model, &target, &[&c]).unwrap();
        assert!((p.r - q.r).abs() < 1e-6);
    }

    #[test]
    fn mismatched_sizes_error() {
        let a = rdm(&[0.1, 0.2, 0.3], 3);
        let b = rdm(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 4);
        assert!(partial_spearman_r2(&a, &b, &[]).is_err());
    }

    #[test]
    fn profile_matches_individual_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let feats: Vec<Rdm> = (0..4)
            .map(|_| rdm(&random_upper(28, &mut rng), 8))
            .collect();
        let model = rdm(&random_upper(28, &mut rng), 8);
        let profile = feature_profile(&model, &feats).unwrap();
        for f in 0..4 {
            let controls: Vec<&Rdm> = (0..4).filter(|&k| k != f).map(|k| &feats[k]).collect();
            assert_eq!(
                profile[f],
                partial_spearman_r2(&model, &feats[f], &controls).unwrap()
            );
        }
    }
}
