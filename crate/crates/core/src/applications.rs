//! Builders turning raw data into generalized eigenproblems.
//!
//! Divisor conventions: sample covariances use `n − 1`, the within-class
//! scatter `S_W` uses `n − K`, and the between-class scatter `S_B` weights
//! each class mean by `n_k / n`. With `T` the total scatter about the grand
//! mean, `T / n = S_B + ((n − K) / n) S_W`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{GepError, Result};
use crate::gep::{regularize_b, GepPair};
use crate::linalg::{ensure_finite, SymMatrix};

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    /// Class labels; any integer values, classes ordered by label.
    Classes(Vec<usize>),
    Real(Vec<f64>),
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Classes(v) => v.len(),
            Response::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledData {
    x: DMatrix<f64>,
    y: Response,
}

impl LabeledData {
    pub fn new(x: DMatrix<f64>, y: Response) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(GepError::ShapeMismatch(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 || x.ncols() == 0 {
            return Err(GepError::InvalidInput(format!(
                "need at least 2 observations and 1 variable, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        ensure_finite(&x)?;
        if let Response::Real(v) = &y {
            if v.iter().any(|t| !t.is_finite()) {
                return Err(GepError::InvalidInput(
                    "y contains non-finite values".into(),
                ));
            }
        }
        Ok(LabeledData { x, y })
    }

    pub fn classes(x: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::new(x, Response::Classes(labels))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &Response {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Class label and member row indices, ordered by label. Empty for a real
    /// response.
    pub fn groups(&self) -> Vec<(usize, Vec<usize>)> {
        match &self.y {
            Response::Classes(labels) => {
                let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (i, &l) in labels.iter().enumerate() {
                    map.entry(l).or_default().push(i);
                }
                map.into_iter().collect()
            }
            Response::Real(_) => Vec::new(),
        }
    }

    /// Same response, with `X` replaced by `X W` (e.g. data projected on an
    /// estimated subspace).
    pub fn project(&self, w: &DMatrix<f64>) -> Result<LabeledData> {
        if w.nrows() != self.p() {
            return Err(GepError::ShapeMismatch(format!(
                "projection has {} rows for {} variables",
                w.nrows(),
                self.p()
            )));
        }
        LabeledData::new(&self.x * w, self.y.clone())
    }
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    x.row_mean().transpose()
}

pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mu = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mu;
    }
    c
}

/// Sample covariance with divisor `n − 1`.
pub fn covariance(x: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(GepError::InvalidInput(format!(
            "covariance needs at least 2 observations, got {n}"
        )));
    }
    ensure_finite(x)?;
    let c = center_columns(x);
    SymMatrix::new(c.transpose() * &c / (n as f64 - 1.0))
}

/// What PCA uses for `A`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PcaScale {
    /// Sample covariance, divisor `n − 1`.
    #[default]
    Covariance,
    /// `XᵀX` of the centered data, undivided.
    Gram,
}

/// `(A, I)` with `A` the covariance or Gram matrix of the column-centered data.
pub fn pca_pair(x: &DMatrix<f64>, scale: PcaScale) -> Result<GepPair> {
    let cov = covariance(x)?;
    let a = match scale {
        PcaScale::Covariance => cov,
        PcaScale::Gram => SymMatrix::new(cov.into_inner() * (x.nrows() as f64 - 1.0))?,
    };
    Ok(GepPair::with_identity_b(a))
}

/// `Σ_h (n_h / n)(x̄_h − x̄)(x̄_h − x̄)ᵀ` over the given row groups.
fn between_scatter(x: &DMatrix<f64>, groups: &[Vec<usize>]) -> SymMatrix {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let grand = column_means(x);
    let mut a = DMatrix::zeros(p, p);
    for g in groups {
        let mut mean = DVector::zeros(p);
        for &i in g {
            mean += x.row(i).transpose();
        }
        mean /= g.len() as f64;
        let diff = mean - &grand;
        a.ger(g.len() as f64 / n, &diff, &diff, 1.0);
    }
    SymMatrix::new(a).expect("finite scatter of finite data")
}

/// Between-class `S_B` and within-class `S_W` scatter, unregularized.
pub fn lda_scatter(data: &LabeledData) -> Result<(SymMatrix, SymMatrix)> {
    let groups = data.groups();
    if !matches!(data.y(), Response::Classes(_)) {
        return Err(GepError::InvalidInput("LDA needs class labels".into()));
    }
    let k = groups.len();
    if k < 2 {
        return Err(GepError::InvalidInput(format!(
            "LDA needs at least 2 classes, got {k}"
        )));
    }
    if let Some((label, members)) = groups.iter().find(|(_, m)| m.len() < 2) {
        return Err(GepError::InvalidInput(format!(
            "class {label} has {} observation(s); at least 2 are required",
            members.len()
        )));
    }
    let x = data.x();
    let (n, p) = x.shape();
    let members: Vec<Vec<usize>> = groups.into_iter().map(|(_, m)| m).collect();
    let sb = between_scatter(x, &members);

    let mut sw = DMatrix::zeros(p, p);
    for g in &members {
        let sub = x.select_rows(g);
        let c = center_columns(&sub);
        sw += c.transpose() * c;
    }
    sw /= (n - k) as f64;
    Ok((sb, SymMatrix::new(sw)?))
}

/// `(S_B, S_W)`, with `S_W` regularized when singular.
pub fn lda_pair(data: &LabeledData) -> Result<GepPair> {
    let (sb, sw) = lda_scatter(data)?;
    GepPair::new(sb, sw)
}

/// Row indices of each slice. Class labels slice by class and ignore
/// `n_slices`. A real response is cut into `n_slices` equal-count bins by
/// rank. Bins that would be empty (more slices than observations) are dropped.
pub fn sir_slices(data: &LabeledData, n_slices: usize) -> Result<Vec<Vec<usize>>> {
    if n_slices < 2 {
        return Err(GepError::InvalidInput(format!(
            "SIR needs at least 2 slices, got {n_slices}"
        )));
    }
    let slices: Vec<Vec<usize>> = match data.y() {
        Response::Classes(_) => data.groups().into_iter().map(|(_, m)| m).collect(),
        Response::Real(y) => {
            let n = y.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| y[i].total_cmp(&y[j]).then(i.cmp(&j)));
            (0..n_slices)
                .map(|h| order[h * n / n_slices..(h + 1) * n / n_slices].to_vec())
                .filter(|s| !s.is_empty())
                .collect()
        }
    };
    if slices.len() < 2 {
        return Err(GepError::InvalidInput(
            "the response takes a single value; SIR needs at least 2 non-empty slices".into(),
        ));
    }
    Ok(slices)
}

/// Sliced inverse regression: `A` the weighted covariance of slice means,
/// `B` the sample covariance of `X`, regularized when singular.
pub fn sir_pair(data: &LabeledData, n_slices: usize) -> Result<GepPair> {
    let slices = sir_slices(data, n_slices)?;
    let a = between_scatter(data.x(), &slices);
    GepPair::new(a, covariance(data.x())?)
}

fn standardize(x: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    let n = x.nrows() as f64;
    let mut c = center_columns(x);
    for (j, mut col) in c.column_iter_mut().enumerate() {
        let sd = (col.norm_squared() / (n - 1.0)).sqrt();
        if !(sd > 1e-12) {
            return Err(GepError::InvalidInput(format!(
                "column {j} of {name} has zero variance and cannot be standardized"
            )));
        }
        col /= sd;
    }
    Ok(c)
}

/// The two CCA eigenproblems, for the `X` coefficients `g` and the `Y`
/// coefficients `h`.
///
/// With `standardized_identity` the columns are standardized and the
/// covariance blocks replaced by identities, giving `(Σ₁₂Σ₁₂ᵀ, I_p)` and
/// `(Σ₁₂ᵀΣ₁₂, I_q)`. Otherwise the pairs are `(Σ₁₂Σ₂⁻¹Σ₂₁, Σ₁)` and
/// `(Σ₂₁Σ₁⁻¹Σ₁₂, Σ₂)` on centered data, with `Σ₁`, `Σ₂` regularized when
/// singular.
pub fn cca_pairs(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    standardized_identity: bool,
) -> Result<(GepPair, GepPair)> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(GepError::ShapeMismatch(format!(
            "X has {n} rows but Y has {}",
            y.nrows()
        )));
    }
    if n < 2 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(GepError::InvalidInput(
            "CCA needs at least 2 observations and non-empty X and Y".into(),
        ));
    }
    ensure_finite(x)?;
    ensure_finite(y)?;
    let denom = n as f64 - 1.0;
    if standardized_identity {
        let xs = standardize(x, "X")?;
        let ys = standardize(y, "Y")?;
        let s12 = xs.transpose() * ys / denom;
        let g = GepPair::with_identity_b(SymMatrix::new(&s12 * s12.transpose())?);
        let h = GepPair::with_identity_b(SymMatrix::new(s12.transpose() * &s12)?);
        Ok((g, h))
    } else {
        let xc = center_columns(x);
        let yc = center_columns(y);
        let s12 = xc.transpose() * &yc / denom;
        let (s1, _) = regularize_b(&SymMatrix::new(xc.transpose() * &xc / denom)?)?;
        let (s2, _) = regularize_b(&SymMatrix::new(yc.transpose() * &yc / denom)?)?;
        let inv_quad = |s: &SymMatrix, m: &DMatrix<f64>| -> Result<SymMatrix> {
            let chol = s.as_matrix().clone().cholesky().ok_or_else(|| {
                GepError::NotPositiveDefinite("covariance block after regularization".into())
            })?;
            SymMatrix::new(m.transpose() * chol.solve(m))
        };
        let ag = inv_quad(&s2, &s12.transpose())?;
        let ah = inv_quad(&s1, &s12)?;
        Ok((GepPair::new(ag, s1)?, GepPair::new(ah, s2)?))
    }
}
