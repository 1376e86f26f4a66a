//! Dense kernels: symmetric eigendecomposition, thin QR, small generalized
//! eigenproblems and the projection distance between subspaces.
//!
//! Every routine fixes its sign convention so results are reproducible:
//! eigenvectors have their largest-magnitude entry positive, and `R` from the
//! thin QR has a nonnegative diagonal.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{GepError, Result};

/// Relative singular-value cutoff used to decide full column rank.
pub const RANK_TOL: f64 = 1e-12;

/// Tolerance on `‖QᵀQ − I‖_max` for a matrix to count as orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;

/// A square symmetric matrix. Construction symmetrizes the input as
/// `(S + Sᵀ)/2`, so `entries[i][j] == entries[j][i]` holds exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(GepError::ShapeMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(GepError::InvalidInput("empty matrix".into()));
        }
        ensure_finite(&m)?;
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymMatrix(sym))
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_row_slice(p: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * p {
            return Err(GepError::ShapeMismatch(format!(
                "{} entries cannot fill a {p}x{p} matrix",
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(p, p, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `Xᵀ S X` as a symmetric matrix.
    pub fn congruence(&self, x: &DMatrix<f64>) -> Result<SymMatrix> {
        if x.nrows() != self.dim() {
            return Err(GepError::ShapeMismatch(format!(
                "congruence with {}x{} basis on a {}x{} matrix",
                x.nrows(),
                x.ncols(),
                self.dim(),
                self.dim()
            )));
        }
        SymMatrix::new(x.transpose() * &self.0 * x)
    }
}

/// A `p×d` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoBasis(DMatrix<f64>);

impl OrthoBasis {
    /// Wraps `m` after checking `‖mᵀm − I‖_max ≤ ORTHO_TOL`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(GepError::InvalidInput(format!(
                "orthonormal basis needs 1 <= d <= p, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let err = orthonormality_error(&m);
        if err > ORTHO_TOL {
            return Err(GepError::InvalidInput(format!(
                "columns are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(OrthoBasis(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        OrthoBasis(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Keeps the first `d` columns.
    pub fn leading(&self, d: usize) -> OrthoBasis {
        OrthoBasis(self.0.columns(0, d.min(self.cols())).into_owned())
    }
}

/// `‖MᵀM − I‖_max`.
pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let d = g.nrows();
    (g - DMatrix::<f64>::identity(d, d)).amax()
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (i, j) = (pos % m.nrows(), pos / m.nrows());
        return Err(GepError::InvalidInput(format!(
            "non-finite entry at ({i}, {j})"
        )));
    }
    Ok(())
}

/// Flips each column so its largest-magnitude entry is positive. Entries
/// within a relative 1e-12 of the maximum count as ties; the lowest index wins.
fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let amax = col.amax();
        if amax == 0.0 {
            continue;
        }
        let lead = col
            .iter()
            .copied()
            .find(|v| v.abs() >= amax * (1.0 - 1e-12))
            .unwrap_or(0.0);
        if lead < 0.0 {
            col.neg_mut();
        }
    }
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: DVector<f64>,
    /// Matching unit eigenvectors as columns.
    pub vectors: OrthoBasis,
}

pub fn sym_eig(s: &SymMatrix) -> Result<SymEigen> {
    ensure_finite(s.as_matrix())?;
    let eig = SymmetricEigen::new(s.as_matrix().clone());
    let p = s.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors);
    Ok(SymEigen {
        values,
        vectors: OrthoBasis(vectors),
    })
}

/// Count of singular values above `RANK_TOL` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Thin QR `Z = QR` with `Q` of size `p×d` and `diag(R) ≥ 0`.
pub fn qr_thin(z: &DMatrix<f64>) -> Result<(OrthoBasis, DMatrix<f64>)> {
    let (p, d) = z.shape();
    if d == 0 || d > p {
        return Err(GepError::InvalidInput(format!(
            "thin QR needs 1 <= d <= p, got {p}x{d}"
        )));
    }
    ensure_finite(z)?;
    let qr = z.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();

    let sv = r.clone().singular_values();
    let smax = sv.max();
    let rank = if smax > 0.0 {
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    } else {
        0
    };
    if rank < d {
        return Err(GepError::RankDeficient { rank, cols: d });
    }

    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok((OrthoBasis(q), r))
}

/// Returns `m` unchanged if already orthonormal, else the `Q` factor of its thin QR.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<OrthoBasis> {
    if m.ncols() >= 1 && m.ncols() <= m.nrows() && orthonormality_error(m) <= ORTHO_TOL {
        return Ok(OrthoBasis(m.clone()));
    }
    qr_thin(m).map(|(q, _)| q)
}

/// Solution of `A T = B T diag(D)` normalized so that `Tᵀ B T = I`.
#[derive(Clone, Debug)]
pub struct GepSolution {
    /// Generalized eigenvectors as columns.
    pub vectors: DMatrix<f64>,
    /// Generalized eigenvalues, descending.
    pub values: DVector<f64>,
}

/// Dense symmetric-definite GEP via Cholesky whitening `B = LLᵀ` and a
/// symmetric eigendecomposition of `L⁻¹ A L⁻ᵀ`.
pub fn small_gep(a: &SymMatrix, b: &SymMatrix) -> Result<GepSolution> {
    if a.dim() != b.dim() {
        return Err(GepError::ShapeMismatch(format!(
            "A is {0}x{0} but B is {1}x{1}",
            a.dim(),
            b.dim()
        )));
    }
    let chol = Cholesky::new(b.as_matrix().clone()).ok_or_else(|| {
        GepError::NotPositiveDefinite("Cholesky factorization of B failed".into())
    })?;
    let l = chol.l();
    let la = l
        .solve_lower_triangular(a.as_matrix())
        .ok_or_else(|| GepError::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| GepError::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let eig = sym_eig(&SymMatrix::new(c)?)?;
    let mut t = l
        .transpose()
        .solve_upper_triangular(eig.vectors.as_matrix())
        .ok_or_else(|| GepError::NotPositiveDefinite("singular Cholesky factor".into()))?;
    fix_column_signs(&mut t);
    Ok(GepSolution {
        vectors: t,
        values: eig.values,
    })
}

/// Orthonormal basis of the leading `d`-dimensional generalized eigenspace,
/// computed by a full dense solve.
pub fn dense_gep_subspace(a: &SymMatrix, b: &SymMatrix, d: usize) -> Result<OrthoBasis> {
    if d == 0 || d > a.dim() {
        return Err(GepError::InvalidInput(format!(
            "subspace dimension {d} out of range for p = {}",
            a.dim()
        )));
    }
    let sol = small_gep(a, b)?;
    let lead = sol.vectors.columns(0, d).into_owned();
    qr_thin(&lead).map(|(q, _)| q)
}

/// Largest sine of the principal angles between `span(u1)` and `span(u2)`,
/// over `min(d1, d2)` angles. Inputs that are not orthonormal are
/// orthonormalized first.
pub fn projection_distance(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<f64> {
    if u1.ncols() == 0 || u2.ncols() == 0 {
        return Err(GepError::InvalidInput(
            "projection distance of a zero-dimensional subspace".into(),
        ));
    }
    if u1.nrows() != u2.nrows() {
        return Err(GepError::ShapeMismatch(format!(
            "bases live in R^{} and R^{}",
            u1.nrows(),
            u2.nrows()
        )));
    }
    let q1 = orthonormalize(u1)?;
    let q2 = orthonormalize(u2)?;
    let (small, big) = if q1.cols() <= q2.cols() {
        (q1.as_matrix(), q2.as_matrix())
    } else {
        (q2.as_matrix(), q1.as_matrix())
    };
    // Singular values of (I - P_big) U_small are the sines of the angles.
    let resid = small - big * (big.transpose() * small);
    let smax = resid.singular_values().max();
    Ok(smax.clamp(0.0, 1.0))
}
