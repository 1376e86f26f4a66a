//! Penalized orthogonal iteration (POI) and its one-shot variant (Fast POI)
//! for the `d` leading generalized eigenvectors of `A u = λ B u`.
//!
//! POI repeats two steps from an initial orthonormal `Q₀`:
//!
//! 1. `Z_r = argmin_Z trace(½ ZᵀBZ − ZᵀA Q_{r−1}) + p_λ(Z)`
//! 2. `Q_r = qr(Z_r).Q`
//!
//! until the projection distance between `Q_r` and `Q_{r−1}` drops below the
//! outer tolerance. Fast POI solves step 1 once with `A Q_{r−1}` replaced by
//! the top-`d` eigenvectors `V` of `A`. In both cases the generalized
//! eigenvectors are then recovered from the basis through the `d×d` pencil
//! `(QᵀAQ, QᵀBQ)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GepError, Result};
use crate::linalg::{
    projection_distance, qr_thin, small_gep, sym_eig, OrthoBasis, SymEigen, SymMatrix, RANK_TOL,
};
use crate::penalty::{solve_penalized, InnerSolveConfig, PenaltyKind, PenaltySpec};

/// Relative eigenvalue cutoff separating positive from null eigenvalues of `B`.
pub const PD_TOL: f64 = 1e-10;

/// A symmetric-definite pencil `(A, B)`. `B` is regularized on construction
/// when it is only semidefinite.
#[derive(Clone, Debug)]
pub struct GepPair {
    a: SymMatrix,
    b: SymMatrix,
    regularized: bool,
    epsilon_used: f64,
    a_eigen: OnceLock<SymEigen>,
}

impl GepPair {
    pub fn new(a: SymMatrix, b: SymMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(GepError::ShapeMismatch(format!(
                "A is {0}x{0} but B is {1}x{1}",
                a.dim(),
                b.dim()
            )));
        }
        let (b, epsilon_used) = regularize_b(&b)?;
        if b.as_matrix().clone().cholesky().is_none() {
            return Err(GepError::NotPositiveDefinite(
                "B is not positive definite after regularization".into(),
            ));
        }
        Ok(GepPair {
            a,
            b,
            regularized: epsilon_used > 0.0,
            epsilon_used,
            a_eigen: OnceLock::new(),
        })
    }

    /// The standard eigenproblem `A u = λ u`.
    pub fn with_identity_b(a: SymMatrix) -> Self {
        let p = a.dim();
        GepPair {
            a,
            b: SymMatrix::identity(p),
            regularized: false,
            epsilon_used: 0.0,
            a_eigen: OnceLock::new(),
        }
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    pub fn b(&self) -> &SymMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn epsilon_used(&self) -> f64 {
        self.epsilon_used
    }

    /// Eigendecomposition of `A`, computed once.
    pub fn a_eigen(&self) -> &SymEigen {
        self.a_eigen
            .get_or_init(|| sym_eig(&self.a).expect("SymMatrix entries are finite"))
    }

    /// Top-`d` eigenvectors of `A` as a `p×d` matrix.
    pub fn top_eigvecs_of_a(&self, d: usize) -> DMatrix<f64> {
        self.a_eigen()
            .vectors
            .as_matrix()
            .columns(0, d)
            .into_owned()
    }
}

/// Makes `B` positive definite by adding `εI` with
/// `ε = min(log p / rank(B), σ_B / 2)`, `σ_B` the smallest positive
/// eigenvalue. Returns `ε = 0` and `B` unchanged when it is already definite.
pub fn regularize_b(b: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let eig = sym_eig(b)?;
    let p = b.dim();
    let largest = eig.values[0];
    let smallest = eig.values[p - 1];
    let scale = eig.values.amax();
    if smallest < -1e-8 * scale {
        return Err(GepError::InvalidInput(format!(
            "B has a negative eigenvalue {smallest:e}"
        )));
    }
    if largest <= 0.0 {
        return Err(GepError::InvalidInput(
            "B has rank zero; no positive eigenvalue to regularize with".into(),
        ));
    }
    let cutoff = PD_TOL * largest;
    if smallest > cutoff {
        return Ok((b.clone(), 0.0));
    }
    let positive: Vec<f64> = eig.values.iter().copied().filter(|&v| v > cutoff).collect();
    let rank = positive.len();
    let sigma = positive.last().copied().unwrap_or(largest);
    let epsilon = ((p as f64).ln() / rank as f64).min(sigma / 2.0);
    let shifted = b.as_matrix() + DMatrix::<f64>::identity(p, p) * epsilon;
    Ok((SymMatrix::new(shifted)?, epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Poi,
    FastPoi,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Poi => "POI",
            Method::FastPoi => "FastPOI",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = GepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poi" => Ok(Method::Poi),
            "fastpoi" | "fast_poi" | "fast-poi" => Ok(Method::FastPoi),
            _ => Err(GepError::InvalidInput(format!(
                "unknown method {s:?}; expected poi or fastpoi"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// Top-`d` eigenvectors of `A`.
    TopEigvecsOfA,
    /// A caller-supplied `p×d` starting basis (orthonormalized if needed).
    Given(DMatrix<f64>),
    /// A Gaussian random matrix, orthonormalized, from the given seed.
    RandomOrtho(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterConfig {
    pub max_outer: usize,
    /// Threshold on the projection distance between successive bases.
    pub outer_tol: f64,
    pub init: Init,
    pub inner: InnerSolveConfig,
    /// Rows of `Q` with ℓ₂ norm above this count as selected variables.
    pub support_tol: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            max_outer: 100,
            outer_tol: 1e-5,
            init: Init::TopEigvecsOfA,
            inner: InnerSolveConfig::default(),
            support_tol: 1e-8,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || !(self.outer_tol > 0.0) || !(self.support_tol > 0.0) {
            return Err(GepError::InvalidInput(
                "outer iteration needs max_outer >= 1 and positive tolerances".into(),
            ));
        }
        self.inner.validate()
    }
}

/// A sparse estimate of the leading generalized eigenspace.
#[derive(Clone, Debug)]
pub struct SubspaceEstimate {
    /// Orthonormal basis of the estimated subspace.
    pub q: OrthoBasis,
    /// Generalized eigenvectors `U = Q T` with `Tᵀ(QᵀBQ)T = I`.
    pub u: DMatrix<f64>,
    /// Estimated generalized eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    /// Sorted indices of rows of `Q` with norm above the support tolerance.
    pub support: Vec<usize>,
    pub penalty: PenaltySpec,
    /// Largest penalty level used.
    pub lambda: f64,
    pub outer_iters: usize,
    pub converged: bool,
    /// True if the last penalized solve lost rank and the basis was completed.
    pub padded: bool,
    /// Inner sweeps summed over all outer iterations.
    pub inner_sweeps: usize,
}

fn check_dims(pair: &GepPair, d: usize) -> Result<()> {
    let p = pair.dim();
    if d == 0 || d >= p {
        return Err(GepError::InvalidInput(format!(
            "subspace dimension must satisfy 1 <= d < p, got d = {d}, p = {p}"
        )));
    }
    Ok(())
}

/// `λ_max` of the POI subproblem, maximized over maximally sparse
/// orthonormal `Q`: `max_ij |a_ij|` for the lasso, and
/// `max_g (Σ_{j≤d} a_{g,(j)}²)^{1/2}` for the row group lasso, where
/// `a_{g,(j)}` is the `j`-th largest magnitude in row `g` of `A`.
pub fn lambda_max_poi(a: &SymMatrix, kind: PenaltyKind, d: usize) -> f64 {
    let a = a.as_matrix();
    match kind {
        PenaltyKind::ElementLasso => a.amax(),
        PenaltyKind::GroupRow => {
            let mut best: f64 = 0.0;
            let mut mags = Vec::with_capacity(a.ncols());
            for row in a.row_iter() {
                mags.clear();
                mags.extend(row.iter().map(|v| v.abs()));
                mags.sort_by(|x, y| y.total_cmp(x));
                let s: f64 = mags.iter().take(d).map(|v| v * v).sum();
                best = best.max(s.sqrt());
            }
            best
        }
    }
}

/// `λ_max` of the Fast POI subproblem with right-hand side `V`: `max |v_ij|`
/// for the lasso, the largest row norm of `V` for the row group lasso.
pub fn lambda_max_fast(v: &DMatrix<f64>, kind: PenaltyKind) -> f64 {
    match kind {
        PenaltyKind::ElementLasso => v.amax(),
        PenaltyKind::GroupRow => v.row_iter().map(|r| r.norm()).fold(0.0, f64::max),
    }
}

pub fn lambda_max(pair: &GepPair, method: Method, kind: PenaltyKind, d: usize) -> Result<f64> {
    check_dims(pair, d)?;
    Ok(match method {
        Method::Poi => lambda_max_poi(pair.a(), kind, d),
        Method::FastPoi => lambda_max_fast(&pair.top_eigvecs_of_a(d), kind),
    })
}

fn initial_basis(pair: &GepPair, d: usize, init: &Init) -> Result<OrthoBasis> {
    let p = pair.dim();
    match init {
        Init::TopEigvecsOfA => Ok(OrthoBasis::new_unchecked(pair.top_eigvecs_of_a(d))),
        Init::Given(q0) => {
            if q0.shape() != (p, d) {
                return Err(GepError::ShapeMismatch(format!(
                    "initial basis is {}x{}, expected {p}x{d}",
                    q0.nrows(),
                    q0.ncols()
                )));
            }
            crate::linalg::orthonormalize(q0)
        }
        Init::RandomOrtho(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let g = DMatrix::from_fn(p, d, |_, _| StandardNormal.sample(&mut rng));
            qr_thin(&g).map(|(q, _)| q)
        }
    }
}

/// Orthonormal basis of `span(Z)`. When `Z` has numerical rank `0 < k < d`,
/// the `k`-dimensional range is completed to `d` columns, first with unit
/// vectors of the active rows of `Z` (largest row norm first), then with
/// eigenvectors of `A`. Returns the basis and whether completion was needed.
fn basis_from_solution(z: &DMatrix<f64>, pair: &GepPair) -> Result<(OrthoBasis, bool)> {
    match qr_thin(z) {
        Ok((q, _)) => Ok((q, false)),
        Err(GepError::RankDeficient { rank, .. }) if rank > 0 => {
            let (p, d) = z.shape();
            let svd = z.clone().svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let smax = svd.singular_values.max();
            let mut cols: Vec<DVector<f64>> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > RANK_TOL * smax)
                .map(|i| u.column(i).into_owned())
                .collect();

            let mut rows: Vec<(usize, f64)> = (0..p)
                .map(|g| (g, z.row(g).norm()))
                .filter(|&(_, n)| n > 0.0)
                .collect();
            rows.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            let unit = |g: usize| {
                let mut e = DVector::zeros(p);
                e[g] = 1.0;
                e
            };
            let eig = pair.a_eigen().vectors.as_matrix();
            let candidates = rows
                .iter()
                .map(|&(g, _)| unit(g))
                .chain((0..p).map(|j| eig.column(j).into_owned()));

            for mut v in candidates {
                if cols.len() == d {
                    break;
                }
                for _ in 0..2 {
                    for c in &cols {
                        let proj = c.dot(&v);
                        v.axpy(-proj, c, 1.0);
                    }
                }
                let n = v.norm();
                if n > 1e-8 {
                    cols.push(v / n);
                }
            }
            let q = DMatrix::from_columns(&cols);
            Ok((OrthoBasis::new(q)?, true))
        }
        Err(e) => Err(e),
    }
}

fn support_of(q: &OrthoBasis, tol: f64) -> Vec<usize> {
    q.as_matrix()
        .row_iter()
        .enumerate()
        .filter(|(_, r)| r.norm() > tol)
        .map(|(i, _)| i)
        .collect()
}

/// Penalized orthogonal iteration.
pub fn poi(
    pair: &GepPair,
    d: usize,
    pen: &PenaltySpec,
    cfg: &OuterConfig,
) -> Result<SubspaceEstimate> {
    check_dims(pair, d)?;
    pen.validate(d)?;
    cfg.validate()?;
    let a = pair.a().as_matrix();
    let b = pair.b().as_matrix();

    let mut q = initial_basis(pair, d, &cfg.init)?;
    let mut converged = false;
    let mut padded = false;
    let mut outer_iters = 0;
    let mut inner_sweeps = 0;

    while outer_iters < cfg.max_outer {
        outer_iters += 1;
        let m = a * q.as_matrix();
        let inner = solve_penalized(b, &m, pen, &cfg.inner, Some(q.as_matrix()))?;
        inner_sweeps += inner.sweeps;
        if inner.z.iter().all(|&v| v == 0.0) {
            return Err(GepError::OverPenalized {
                lambda: pen.level(),
                lambda_max: lambda_max_poi(pair.a(), pen.kind(), d),
            });
        }
        let (next, was_padded) = basis_from_solution(&inner.z, pair)?;
        padded = was_padded;
        let step = projection_distance(next.as_matrix(), q.as_matrix())?;
        q = next;
        if step < cfg.outer_tol {
            converged = true;
            break;
        }
    }
    finish(
        pair,
        q,
        pen,
        cfg,
        outer_iters,
        converged,
        padded,
        inner_sweeps,
    )
}

/// Fast POI: a single penalized solve against the top-`d` eigenvectors of `A`.
pub fn fast_poi(
    pair: &GepPair,
    d: usize,
    pen: &PenaltySpec,
    cfg: &OuterConfig,
) -> Result<SubspaceEstimate> {
    check_dims(pair, d)?;
    pen.validate(d)?;
    cfg.validate()?;
    let v = pair.top_eigvecs_of_a(d);
    let inner = solve_penalized(pair.b().as_matrix(), &v, pen, &cfg.inner, Some(&v))?;
    if inner.z.iter().all(|&x| x == 0.0) {
        return Err(GepError::OverPenalized {
            lambda: pen.level(),
            lambda_max: lambda_max_fast(&v, pen.kind()),
        });
    }
    let (q, padded) = basis_from_solution(&inner.z, pair)?;
    finish(pair, q, pen, cfg, 1, inner.converged, padded, inner.sweeps)
}

pub fn fit(
    method: Method,
    pair: &GepPair,
    d: usize,
    pen: &PenaltySpec,
    cfg: &OuterConfig,
) -> Result<SubspaceEstimate> {
    match method {
        Method::Poi => poi(pair, d, pen, cfg),
        Method::FastPoi => fast_poi(pair, d, pen, cfg),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    pair: &GepPair,
    q: OrthoBasis,
    pen: &PenaltySpec,
    cfg: &OuterConfig,
    outer_iters: usize,
    converged: bool,
    padded: bool,
    inner_sweeps: usize,
) -> Result<SubspaceEstimate> {
    let (u, eigenvalues) = recover_pair(&q, pair)?;
    let support = support_of(&q, cfg.support_tol);
    Ok(SubspaceEstimate {
        q,
        u,
        eigenvalues,
        support,
        penalty: pen.clone(),
        lambda: pen.level(),
        outer_iters,
        converged,
        padded,
        inner_sweeps,
    })
}

/// Generalized eigenvectors and eigenvalues from an orthonormal basis of the
/// eigenspace: solves `(QᵀAQ) T = (QᵀBQ) T D` with `Tᵀ(QᵀBQ)T = I` and
/// returns `U = QT`, `D` descending.
pub fn recover_pair(q: &OrthoBasis, pair: &GepPair) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if q.rows() != pair.dim() {
        return Err(GepError::ShapeMismatch(format!(
            "basis has {} rows for a {}-dimensional problem",
            q.rows(),
            pair.dim()
        )));
    }
    let at = pair.a().congruence(q.as_matrix())?;
    let bt = pair.b().congruence(q.as_matrix())?;
    let sol = small_gep(&at, &bt).map_err(|e| match e {
        GepError::NotPositiveDefinite(_) => {
            GepError::NotPositiveDefinite("projected B is singular; the basis is degenerate".into())
        }
        other => other,
    })?;
    Ok((q.as_matrix() * sol.vectors, sol.values))
}

fn check_columns(u: &DMatrix<f64>, pair: &GepPair) -> Result<()> {
    if u.nrows() != pair.dim() || u.ncols() == 0 {
        return Err(GepError::ShapeMismatch(format!(
            "eigenvector matrix is {}x{} for a {}-dimensional problem",
            u.nrows(),
            u.ncols(),
            pair.dim()
        )));
    }
    Ok(())
}

/// Rayleigh-quotient eigenvalues `uⱼᵀAuⱼ / uⱼᵀBuⱼ`.
pub fn rayleigh_eigenvalues(u: &DMatrix<f64>, pair: &GepPair) -> Result<DVector<f64>> {
    check_columns(u, pair)?;
    let au = pair.a().as_matrix() * u;
    let bu = pair.b().as_matrix() * u;
    let mut out = DVector::zeros(u.ncols());
    for j in 0..u.ncols() {
        let den = u.column(j).dot(&bu.column(j));
        if !(den > 0.0) {
            return Err(GepError::DegenerateColumn {
                column: j,
                reason: "zero B-norm".into(),
            });
        }
        out[j] = u.column(j).dot(&au.column(j)) / den;
    }
    Ok(out)
}

/// Least-squares eigenvalues minimizing `‖AU − BUΛ‖_F` over diagonal `Λ`:
/// `λ̃ⱼ = βⱼᵀαⱼ / βⱼᵀβⱼ` with `αⱼ = Auⱼ`, `βⱼ = Buⱼ`.
pub fn eigenvalues_ls(u: &DMatrix<f64>, pair: &GepPair) -> Result<DVector<f64>> {
    check_columns(u, pair)?;
    let au = pair.a().as_matrix() * u;
    let bu = pair.b().as_matrix() * u;
    let mut out = DVector::zeros(u.ncols());
    for j in 0..u.ncols() {
        let beta = bu.column(j);
        let bn = beta.norm();
        if bn <= 1e-12 {
            return Err(GepError::DegenerateColumn {
                column: j,
                reason: format!("‖B u‖ = {bn:e}"),
            });
        }
        out[j] = beta.dot(&au.column(j)) / (bn * bn);
    }
    Ok(out)
}
