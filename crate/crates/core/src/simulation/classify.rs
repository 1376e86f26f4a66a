//! Gaussian linear discriminant classifier for reduced data.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::applications::{LabeledData, Response};
use crate::error::{GepError, Result};

/// Relative ridge added to a singular pooled covariance.
pub const POOLED_RIDGE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdaPrediction {
    pub labels: Vec<usize>,
    pub misclassification: f64,
    /// True if the pooled covariance needed a ridge.
    pub ridged: bool,
}

/// Fits LDA on `train` (pooled covariance with divisor `n − K`, priors equal to
/// class frequencies) and classifies `test`.
pub fn classify_lda(train: &LabeledData, test: &LabeledData) -> Result<LdaPrediction> {
    let groups = train.groups();
    if groups.len() < 2 {
        return Err(GepError::InvalidInput(
            "LDA needs at least 2 training classes".into(),
        ));
    }
    let Response::Classes(truth) = test.y() else {
        return Err(GepError::InvalidInput("test data need class labels".into()));
    };
    let d = train.p();
    if test.p() != d {
        return Err(GepError::ShapeMismatch(format!(
            "training data have {d} columns, test data {}",
            test.p()
        )));
    }
    let x = train.x();
    let n = x.nrows();
    let k = groups.len();
    if n <= k {
        return Err(GepError::InvalidInput(format!(
            "LDA needs more observations ({n}) than classes ({k})"
        )));
    }

    let mut means = Vec::with_capacity(k);
    let mut pooled = DMatrix::zeros(d, d);
    for (_, members) in &groups {
        let sub = x.select_rows(members);
        let mean: DVector<f64> = sub.row_mean().transpose();
        for row in sub.row_iter() {
            let diff = row.transpose() - &mean;
            pooled.ger(1.0, &diff, &diff, 1.0);
        }
        means.push(mean);
    }
    pooled /= (n - k) as f64;

    let mut ridged = false;
    let chol = match pooled.clone().cholesky() {
        Some(c) if c.l().diagonal().min() > 1e-12 * c.l().diagonal().max() => c,
        _ => {
            ridged = true;
            let ridge = POOLED_RIDGE * pooled.trace().max(f64::MIN_POSITIVE) / d as f64;
            (pooled + DMatrix::identity(d, d) * ridge)
                .cholesky()
                .ok_or_else(|| {
                    GepError::NotPositiveDefinite("pooled covariance after ridge".into())
                })?
        }
    };

    // δ_k(x) = xᵀ S⁻¹ μ_k − ½ μ_kᵀ S⁻¹ μ_k + log π_k
    let coefs: Vec<DVector<f64>> = means.iter().map(|m| chol.solve(m)).collect();
    let offsets: Vec<f64> = groups
        .iter()
        .zip(means.iter().zip(&coefs))
        .map(|((_, members), (m, c))| -0.5 * m.dot(c) + (members.len() as f64 / n as f64).ln())
        .collect();

    let mut labels = Vec::with_capacity(test.n());
    let mut errors = 0usize;
    for (i, row) in test.x().row_iter().enumerate() {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (c, (coef, off)) in coefs.iter().zip(&offsets).enumerate() {
            let s = row.transpose().dot(coef) + off;
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        let label = groups[best].0;
        if label != truth[i] {
            errors += 1;
        }
        labels.push(label);
    }
    Ok(LdaPrediction {
        misclassification: errors as f64 / test.n() as f64,
        labels,
        ridged,
    })
}
