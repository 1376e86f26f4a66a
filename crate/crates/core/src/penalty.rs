//! Solvers for the penalized quadratic subproblem
//!
//! ```text
//! minimize  trace(½ ZᵀBZ − ZᵀM) + p_λ(Z)
//! ```
//!
//! with either an element-wise lasso penalty `Σ_j λ_j ‖z_j‖₁` (cyclic
//! coordinate descent with soft-thresholding, one column at a time) or a row
//! group-lasso penalty `λ Σ_i ‖row_i(Z)‖₂` (cyclic block coordinate descent
//! over rows). Both solvers keep the residual `M − BZ` up to date instead of
//! recomputing `BZ` for every coordinate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GepError, Result};
use crate::linalg::ensure_finite;

/// Sweeps between exact recomputations of the maintained residual.
const RESIDUAL_REFRESH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// Lasso on every entry, separately per column.
    ElementLasso,
    /// Group lasso on rows: whole variables enter or leave together.
    GroupRow,
}

impl PenaltyKind {
    /// Conventional one-letter suffix, `L` or `C`.
    pub fn suffix(self) -> &'static str {
        match self {
            PenaltyKind::ElementLasso => "L",
            PenaltyKind::GroupRow => "C",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = GepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lasso" | "l" | "element_lasso" => Ok(PenaltyKind::ElementLasso),
            "group" | "c" | "group_row" => Ok(PenaltyKind::GroupRow),
            _ => Err(GepError::InvalidInput(format!(
                "unknown penalty {s:?}; expected lasso or group"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    ElementLasso { lambdas: Vec<f64> },
    GroupRow { lambda: f64 },
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(GepError::InvalidInput(format!(
            "penalty level must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

impl PenaltySpec {
    pub fn lasso(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(GepError::InvalidInput(
                "lasso needs one lambda per column".into(),
            ));
        }
        lambdas.iter().try_for_each(|&l| check_lambda(l))?;
        Ok(PenaltySpec::ElementLasso { lambdas })
    }

    pub fn group(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(PenaltySpec::GroupRow { lambda })
    }

    /// Same level `lambda` for every one of the `d` columns.
    pub fn uniform(kind: PenaltyKind, lambda: f64, d: usize) -> Result<Self> {
        match kind {
            PenaltyKind::ElementLasso => Self::lasso(vec![lambda; d]),
            PenaltyKind::GroupRow => Self::group(lambda),
        }
    }

    pub fn kind(&self) -> PenaltyKind {
        match self {
            PenaltySpec::ElementLasso { .. } => PenaltyKind::ElementLasso,
            PenaltySpec::GroupRow { .. } => PenaltyKind::GroupRow,
        }
    }

    /// Largest penalty level in the spec.
    pub fn level(&self) -> f64 {
        match self {
            PenaltySpec::ElementLasso { lambdas } => lambdas.iter().copied().fold(0.0, f64::max),
            PenaltySpec::GroupRow { lambda } => *lambda,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            PenaltySpec::ElementLasso { lambdas } => {
                if lambdas.len() != d {
                    return Err(GepError::ShapeMismatch(format!(
                        "lasso carries {} lambdas for {d} columns",
                        lambdas.len()
                    )));
                }
                lambdas.iter().try_for_each(|&l| check_lambda(l))
            }
            PenaltySpec::GroupRow { lambda } => check_lambda(*lambda),
        }
    }

    /// `p_λ(Z)`.
    pub fn value(&self, z: &DMatrix<f64>) -> f64 {
        match self {
            PenaltySpec::ElementLasso { lambdas } => z
                .column_iter()
                .zip(lambdas)
                .map(|(c, l)| l * c.lp_norm(1))
                .sum(),
            PenaltySpec::GroupRow { lambda } => {
                lambda * z.row_iter().map(|r| r.norm()).sum::<f64>()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveConfig {
    pub max_sweeps: usize,
    /// Stop once no entry moves by more than this across a full sweep.
    pub tol: f64,
}

impl Default for InnerSolveConfig {
    fn default() -> Self {
        InnerSolveConfig {
            max_sweeps: 10_000,
            tol: 1e-7,
        }
    }
}

impl InnerSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 || !(self.tol > 0.0) {
            return Err(GepError::InvalidInput(format!(
                "inner solver needs max_sweeps >= 1 and tol > 0, got {} and {}",
                self.max_sweeps, self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub z: DMatrix<f64>,
    /// Sweeps performed (for the lasso, the most any column needed).
    pub sweeps: usize,
    /// False if the sweep cap was hit before the tolerance was met.
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ColumnSolution {
    pub z: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// `sign(z)·max(|z| − λ, 0)`.
#[inline]
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

fn check_system(b: &DMatrix<f64>, rows: usize) -> Result<()> {
    if !b.is_square() || b.nrows() != rows {
        return Err(GepError::ShapeMismatch(format!(
            "B is {}x{} but the right-hand side has {rows} rows",
            b.nrows(),
            b.ncols()
        )));
    }
    if let Some(i) = (0..rows).find(|&i| !(b[(i, i)] > 0.0)) {
        return Err(GepError::NotPositiveDefinite(format!(
            "diagonal entry B[{i},{i}] = {} is not positive",
            b[(i, i)]
        )));
    }
    ensure_finite(b)
}

/// Cyclic coordinate descent for `½zᵀBz − zᵀm + λ‖z‖₁`.
pub fn solve_lasso_column(
    b: &DMatrix<f64>,
    m: &DVector<f64>,
    lambda: f64,
    cfg: &InnerSolveConfig,
    warm_start: Option<&DVector<f64>>,
) -> Result<ColumnSolution> {
    solve_lasso_column_traced(b, m, lambda, cfg, warm_start, &mut |_| {})
}

/// As [`solve_lasso_column`], calling `on_sweep` with the iterate after every sweep.
pub fn solve_lasso_column_traced(
    b: &DMatrix<f64>,
    m: &DVector<f64>,
    lambda: f64,
    cfg: &InnerSolveConfig,
    warm_start: Option<&DVector<f64>>,
    on_sweep: &mut dyn FnMut(&DVector<f64>),
) -> Result<ColumnSolution> {
    let p = m.len();
    check_system(b, p)?;
    check_lambda(lambda)?;
    cfg.validate()?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GepError::InvalidInput(
            "right-hand side has non-finite entries".into(),
        ));
    }

    let mut z = match warm_start {
        Some(w) if w.len() == p => w.clone(),
        Some(w) => {
            return Err(GepError::ShapeMismatch(format!(
                "warm start has {} entries, expected {p}",
                w.len()
            )))
        }
        None => DVector::zeros(p),
    };
    let mut resid = m - b * &z;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for i in 0..p {
            let bii = b[(i, i)];
            let zi = z[i];
            let target = resid[i] + bii * zi;
            let updated = soft_threshold(target, lambda) / bii;
            let delta = updated - zi;
            if delta != 0.0 {
                z[i] = updated;
                resid.axpy(-delta, &b.column(i), 1.0);
                max_change = max_change.max(delta.abs());
            }
        }
        if sweeps % RESIDUAL_REFRESH == 0 {
            resid = m - b * &z;
        }
        on_sweep(&z);
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(ColumnSolution {
        z,
        sweeps,
        converged,
    })
}

/// Cyclic block coordinate descent over rows for
/// `trace(½ZᵀBZ − ZᵀM) + λ Σ_g ‖row_g(Z)‖₂`.
pub fn solve_group_rows(
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    lambda: f64,
    cfg: &InnerSolveConfig,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<InnerSolution> {
    solve_group_rows_traced(b, m, lambda, cfg, warm_start, &mut |_| {})
}

/// As [`solve_group_rows`], calling `on_sweep` with the iterate after every sweep.
pub fn solve_group_rows_traced(
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    lambda: f64,
    cfg: &InnerSolveConfig,
    warm_start: Option<&DMatrix<f64>>,
    on_sweep: &mut dyn FnMut(&DMatrix<f64>),
) -> Result<InnerSolution> {
    let (p, d) = m.shape();
    check_system(b, p)?;
    check_lambda(lambda)?;
    cfg.validate()?;
    ensure_finite(m)?;

    let mut z = match warm_start {
        Some(w) if w.shape() == (p, d) => w.clone(),
        Some(w) => {
            return Err(GepError::ShapeMismatch(format!(
                "warm start is {}x{}, expected {p}x{d}",
                w.nrows(),
                w.ncols()
            )))
        }
        None => DMatrix::zeros(p, d),
    };
    let mut resid = m - b * &z;
    let mut target = DVector::<f64>::zeros(d);
    let mut delta = DVector::<f64>::zeros(d);
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for g in 0..p {
            let bgg = b[(g, g)];
            for j in 0..d {
                target[j] = resid[(g, j)] + bgg * z[(g, j)];
            }
            let norm = target.norm();
            let shrink = if norm > lambda {
                (1.0 - lambda / norm) / bgg
            } else {
                0.0
            };
            let mut moved = false;
            for j in 0..d {
                let updated = shrink * target[j];
                delta[j] = updated - z[(g, j)];
                if delta[j] != 0.0 {
                    moved = true;
                    max_change = max_change.max(delta[j].abs());
                    z[(g, j)] = updated;
                }
            }
            if moved {
                // resid -= B[:, g] ⊗ delta
                let bcol = b.column(g);
                for j in 0..d {
                    let dj = delta[j];
                    if dj != 0.0 {
                        resid.column_mut(j).axpy(-dj, &bcol, 1.0);
                    }
                }
            }
        }
        if sweeps % RESIDUAL_REFRESH == 0 {
            resid = m - b * &z;
        }
        on_sweep(&z);
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(InnerSolution {
        z,
        sweeps,
        converged,
    })
}

/// Minimizes `trace(½ZᵀBZ − ZᵀM) + p_λ(Z)` for either penalty family.
pub fn solve_penalized(
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    pen: &PenaltySpec,
    cfg: &InnerSolveConfig,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<InnerSolution> {
    pen.validate(m.ncols())?;
    if let Some(w) = warm_start {
        if w.shape() != m.shape() {
            return Err(GepError::ShapeMismatch(format!(
                "warm start is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                m.nrows(),
                m.ncols()
            )));
        }
    }
    match pen {
        PenaltySpec::GroupRow { lambda } => solve_group_rows(b, m, *lambda, cfg, warm_start),
        PenaltySpec::ElementLasso { lambdas } => {
            let (p, d) = m.shape();
            let mut z = DMatrix::zeros(p, d);
            let mut sweeps = 0;
            let mut converged = true;
            for (j, &lambda) in lambdas.iter().enumerate() {
                let mj = m.column(j).into_owned();
                let warm = warm_start.map(|w| w.column(j).into_owned());
                let col = solve_lasso_column(b, &mj, lambda, cfg, warm.as_ref())?;
                z.set_column(j, &col.z);
                sweeps = sweeps.max(col.sweeps);
                converged &= col.converged;
            }
            Ok(InnerSolution {
                z,
                sweeps,
                converged,
            })
        }
    }
}

fn check_shapes(
    z: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    pen: &PenaltySpec,
) -> Result<()> {
    if z.shape() != m.shape() || !b.is_square() || b.nrows() != z.nrows() {
        return Err(GepError::ShapeMismatch(format!(
            "Z is {}x{}, B is {}x{}, M is {}x{}",
            z.nrows(),
            z.ncols(),
            b.nrows(),
            b.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    pen.validate(z.ncols())
}

/// `trace(½ZᵀBZ − ZᵀM) + p_λ(Z)`.
pub fn penalized_objective(
    z: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    pen: &PenaltySpec,
) -> Result<f64> {
    check_shapes(z, b, m, pen)?;
    let bz = b * z;
    let quad = 0.5 * z.dot(&bz) - z.dot(m);
    Ok(quad + pen.value(z))
}

/// Largest violation of the subgradient optimality conditions at `Z`; zero
/// exactly when `Z` is optimal.
pub fn kkt_residual(
    z: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    pen: &PenaltySpec,
) -> Result<f64> {
    check_shapes(z, b, m, pen)?;
    let grad = b * z - m;
    let worst = match pen {
        PenaltySpec::ElementLasso { lambdas } => {
            let mut worst: f64 = 0.0;
            for (j, &lambda) in lambdas.iter().enumerate() {
                for i in 0..z.nrows() {
                    let (zij, gij) = (z[(i, j)], grad[(i, j)]);
                    let v = if zij == 0.0 {
                        (gij.abs() - lambda).max(0.0)
                    } else {
                        (gij + lambda * zij.signum()).abs()
                    };
                    worst = worst.max(v);
                }
            }
            worst
        }
        PenaltySpec::GroupRow { lambda } => {
            let mut worst: f64 = 0.0;
            for g in 0..z.nrows() {
                let zg = z.row(g);
                let gg = grad.row(g);
                let norm = zg.norm();
                let v = if norm == 0.0 {
                    (gg.norm() - lambda).max(0.0)
                } else {
                    (gg + zg * (lambda / norm)).norm()
                };
                worst = worst.max(v);
            }
            worst
        }
    };
    Ok(worst)
}
