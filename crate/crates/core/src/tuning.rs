//! Eigenvalue-based cross-validation over a geometric λ grid.
//!
//! An estimate `Û` fitted on a training pair is scored on a held-out pair by
//! `trace[(ÛᵀB₂Û)⁻¹ ÛᵀA₂Û]`, the sum of the generalized eigenvalues of the
//! held-out problem restricted to `span(Û)`. Larger is better.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GepError, Result};
use crate::exec::{map_indexed, Execution};
use crate::gep::{fit, lambda_max, GepPair, Method, OuterConfig, SubspaceEstimate};
use crate::linalg::SymMatrix;
use crate::penalty::{PenaltyKind, PenaltySpec};

/// `ÛᵀB₂Û` with a condition number at or above this is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_RATIO: f64 = 0.75;
pub const DEFAULT_STEPS: usize = 31;

/// Score with a reason on failure.
pub fn cv_score_checked(u: &DMatrix<f64>, a2: &SymMatrix, b2: &SymMatrix) -> Result<f64> {
    if u.nrows() != a2.dim() || a2.dim() != b2.dim() || u.ncols() == 0 {
        return Err(GepError::ShapeMismatch(format!(
            "U is {}x{}, A2 is {2}x{2}, B2 is {3}x{3}",
            u.nrows(),
            u.ncols(),
            a2.dim(),
            b2.dim()
        )));
    }
    let m = b2.congruence(u)?;
    let n = a2.congruence(u)?;
    let eig = m.as_matrix().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo >= MAX_CONDITION {
        return Err(GepError::NotPositiveDefinite(format!(
            "UᵀB₂U is singular (eigenvalues in [{lo:e}, {hi:e}])"
        )));
    }
    let chol = m
        .into_inner()
        .cholesky()
        .ok_or_else(|| GepError::NotPositiveDefinite("UᵀB₂U has no Cholesky factor".into()))?;
    Ok(chol.solve(n.as_matrix()).trace())
}

/// `trace[(UᵀB₂U)⁻¹ UᵀA₂U]`, or NaN when `UᵀB₂U` is singular.
pub fn cv_score(u: &DMatrix<f64>, a2: &SymMatrix, b2: &SymMatrix) -> f64 {
    cv_score_checked(u, a2, b2).unwrap_or(f64::NAN)
}

/// `[λ_max, rλ_max, …, r^t λ_max, ∞]`. The trailing `∞` stands for the zero
/// estimate and always scores `−∞`.
pub fn lambda_grid(lambda_max: f64, ratio: f64, t: usize) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(GepError::InvalidInput(format!(
            "lambda_max must be positive and finite, got {lambda_max}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(GepError::InvalidInput(format!(
            "grid ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut grid: Vec<f64> = (0..=t).map(|i| lambda_max * ratio.powi(i as i32)).collect();
    grid.push(f64::INFINITY);
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneConfig {
    pub ratio: f64,
    pub steps: usize,
    pub outer: OuterConfig,
    pub exec: Execution,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            ratio: DEFAULT_RATIO,
            steps: DEFAULT_STEPS,
            outer: OuterConfig::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CvReport {
    /// Descending finite λ values followed by the `∞` sentinel.
    pub grid: Vec<f64>,
    /// Mean score per grid point; NaN where the estimate is undefined.
    pub scores: Vec<f64>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    /// Splits × grid score matrix when several splits were used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_split_scores: Option<Vec<Vec<f64>>>,
    /// Largest λ within one standard error of the best mean score.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub one_se_lambda: Option<f64>,
    /// Grid indices whose score is NaN, with the reason.
    pub diagnostics: Vec<(usize, String)>,
}

/// Fits on `train` at every finite grid point. The `∞` sentinel yields an
/// over-penalization error without solving.
pub fn fit_path(
    train: &GepPair,
    d: usize,
    kind: PenaltyKind,
    method: Method,
    grid: &[f64],
    outer: &OuterConfig,
    exec: Execution,
) -> Vec<Result<SubspaceEstimate>> {
    // fill the shared eigendecomposition cache before fanning out
    let _ = train.a_eigen();
    map_indexed(exec, grid.len(), |i| {
        let lam = grid[i];
        if lam.is_infinite() {
            return Err(GepError::OverPenalized {
                lambda: lam,
                lambda_max: grid.first().copied().unwrap_or(f64::NAN),
            });
        }
        let pen = PenaltySpec::uniform(kind, lam, d)?;
        fit(method, train, d, &pen, outer)
    })
}

/// Scores each fitted estimate on the tuning pair. Failed fits score NaN.
pub fn score_path(
    path: &[Result<SubspaceEstimate>],
    tune: &GepPair,
) -> (Vec<f64>, Vec<(usize, String)>) {
    let mut scores = Vec::with_capacity(path.len());
    let mut diagnostics = Vec::new();
    for (i, est) in path.iter().enumerate() {
        let s = match est {
            Ok(est) => cv_score_checked(&est.u, tune.a(), tune.b()),
            Err(e) => Err(e.clone()),
        };
        match s {
            Ok(v) if v.is_finite() => scores.push(v),
            Ok(v) => {
                diagnostics.push((i, format!("non-finite score {v}")));
                scores.push(f64::NAN);
            }
            Err(e) => {
                diagnostics.push((i, e.to_string()));
                scores.push(f64::NAN);
            }
        }
    }
    (scores, diagnostics)
}

/// Index of the largest finite score; ties go to the smaller index, i.e. the
/// larger λ. `None` if no score is finite.
pub fn best_index(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn check_pairs(train: &GepPair, tune: &GepPair) -> Result<()> {
    if train.dim() != tune.dim() {
        return Err(GepError::ShapeMismatch(format!(
            "training pair has p = {}, tuning pair has p = {}",
            train.dim(),
            tune.dim()
        )));
    }
    Ok(())
}

/// Fits on `train` across the grid built from its `λ_max`, scores on `tune`,
/// and returns the report together with the estimate at the selected λ.
pub fn select_lambda(
    train: &GepPair,
    tune: &GepPair,
    d: usize,
    kind: PenaltyKind,
    method: Method,
    cfg: &TuneConfig,
) -> Result<(CvReport, SubspaceEstimate)> {
    check_pairs(train, tune)?;
    let grid = lambda_grid(lambda_max(train, method, kind, d)?, cfg.ratio, cfg.steps)?;
    select_on_grid(train, tune, d, kind, method, &grid, cfg)
}

/// As [`select_lambda`] with a caller-supplied grid.
pub fn select_on_grid(
    train: &GepPair,
    tune: &GepPair,
    d: usize,
    kind: PenaltyKind,
    method: Method,
    grid: &[f64],
    cfg: &TuneConfig,
) -> Result<(CvReport, SubspaceEstimate)> {
    check_pairs(train, tune)?;
    let mut path = fit_path(train, d, kind, method, grid, &cfg.outer, cfg.exec);
    let (scores, diagnostics) = score_path(&path, tune);
    let selected_index = best_index(&scores).ok_or_else(|| {
        GepError::TuningFailed("no grid point produced a finite cross-validation score".into())
    })?;
    let estimate = path.swap_remove(selected_index)?;
    let report = CvReport {
        selected_lambda: grid[selected_index],
        grid: grid.to_vec(),
        scores,
        selected_index,
        per_split_scores: None,
        one_se_lambda: None,
        diagnostics,
    };
    Ok((report, estimate))
}

/// Cross-validation over several train/tune splits on a common grid built
/// from the largest `λ_max` among the training pairs. Selects by mean score
/// and also reports the one-standard-error choice.
pub fn select_multi_split(
    splits: &[(GepPair, GepPair)],
    d: usize,
    kind: PenaltyKind,
    method: Method,
    cfg: &TuneConfig,
) -> Result<CvReport> {
    if splits.len() < 2 {
        return Err(GepError::InvalidInput(
            "multi-split cross-validation needs at least 2 splits".into(),
        ));
    }
    let mut lmax: f64 = 0.0;
    for (train, tune) in splits {
        check_pairs(train, tune)?;
        lmax = lmax.max(lambda_max(train, method, kind, d)?);
    }
    let grid = lambda_grid(lmax, cfg.ratio, cfg.steps)?;
    let mut per_split = Vec::with_capacity(splits.len());
    let mut diagnostics = Vec::new();
    for (train, tune) in splits {
        let path = fit_path(train, d, kind, method, &grid, &cfg.outer, cfg.exec);
        let (scores, diag) = score_path(&path, tune);
        per_split.push(scores);
        diagnostics.extend(diag);
    }
    diagnostics.sort_by_key(|x| x.0);
    diagnostics.dedup_by(|x, y| x.0 == y.0);
    let (means, _) = column_stats(&per_split);
    let selected_index = best_index(&means).ok_or_else(|| {
        GepError::TuningFailed("no grid point produced a finite mean score".into())
    })?;
    let one_se = one_se_select(&per_split, &grid)?;
    Ok(CvReport {
        selected_lambda: grid[selected_index],
        grid,
        scores: means,
        selected_index,
        per_split_scores: Some(per_split),
        one_se_lambda: Some(one_se),
        diagnostics,
    })
}

/// Per-column mean and standard error (sample standard deviation over
/// `√K`). A column with any NaN entry gets NaN for both.
fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = rows.len() as f64;
    let g = rows.first().map_or(0, Vec::len);
    let mut means = vec![f64::NAN; g];
    let mut ses = vec![f64::NAN; g];
    for j in 0..g {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        if col.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let mean = col.iter().sum::<f64>() / k;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        means[j] = mean;
        ses[j] = (var / k).sqrt();
    }
    (means, ses)
}

/// One-standard-error rule: the largest λ whose mean score is at least the
/// best mean minus the standard error at the best λ.
pub fn one_se_select(per_split_scores: &[Vec<f64>], grid: &[f64]) -> Result<f64> {
    if per_split_scores.len() < 2 {
        return Err(GepError::InvalidInput(
            "the one-standard-error rule needs at least 2 splits".into(),
        ));
    }
    if per_split_scores.iter().any(|r| r.len() != grid.len()) {
        return Err(GepError::ShapeMismatch(
            "every split must have one score per grid point".into(),
        ));
    }
    let (means, ses) = column_stats(per_split_scores);
    let best = best_index(&means).ok_or_else(|| {
        GepError::TuningFailed("no grid point produced a finite mean score".into())
    })?;
    let threshold = means[best] - ses[best];
    let mut chosen = best;
    for (j, &lam) in grid.iter().enumerate() {
        if lam.is_finite() && means[j].is_finite() && means[j] >= threshold && lam > grid[chosen] {
            chosen = j;
        }
    }
    Ok(grid[chosen])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{projection_distance, qr_thin};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, p: usize, shift: f64) -> SymMatrix {
        let g = random_matrix(rng, p, p);
        SymMatrix::new(&g * g.transpose() / p as f64 + DMatrix::identity(p, p) * shift).unwrap()
    }

    #[test]
    fn score_of_single_axis() {
        let a2 = SymMatrix::from_diagonal(&[5.0, 1.0]).unwrap();
        let u = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(cv_score(&u, &a2, &SymMatrix::identity(2)), 5.0);
    }

    #[test]
    fn score_of_top_eigenspace_is_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a2 = random_spd(&mut rng, 7, 0.0);
        let eig = crate::linalg::sym_eig(&a2).unwrap();
        let u = eig.vectors.leading(3);
        let s = cv_score(u.as_matrix(), &a2, &SymMatrix::identity(7));
        assert_abs_diff_eq!(s, eig.values.rows(0, 3).sum(), epsilon = 1e-10);
    }

    #[test]
    fn score_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a2 = random_spd(&mut rng, 6, 0.0);
        let b2 = random_spd(&mut rng, 6, 0.3);
        let u = random_matrix(&mut rng, 6, 2);
        let m = u.transpose() * b2.as_matrix() * &u;
        let n = u.transpose() * a2.as_matrix() * &u;
        // closed-form 2x2 inverse
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let inv =
            DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]) / det;
        assert_abs_diff_eq!(cv_score(&u, &a2, &b2), (inv * n).trace(), epsilon = 1e-10);
    }

    #[test]
    fn singular_score_is_nan() {
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let s = cv_score(&u, &SymMatrix::identity(3), &SymMatrix::identity(3));
        assert!(s.is_nan());
    }

    #[test]
    fn grid_examples() {
        assert_eq!(
            lambda_grid(1.0, 0.5, 2).unwrap(),
            vec![1.0, 0.5, 0.25, f64::INFINITY]
        );
        assert_eq!(lambda_grid(8.0, 0.75, 0).unwrap(), vec![8.0, f64::INFINITY]);
        assert_eq!(
            lambda_grid(3.0, DEFAULT_RATIO, DEFAULT_STEPS)
                .unwrap()
                .len(),
            33
        );
        assert!(lambda_grid(0.0, 0.5, 3).is_err());
        assert!(lambda_grid(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn ties_go_to_larger_lambda() {
        assert_eq!(best_index(&[f64::NAN, 2.0, 3.0, 3.0, f64::NAN]), Some(2));
        assert_eq!(best_index(&[f64::NAN, f64::NAN]), None);
    }

    #[test]
    fn one_se_identical_scores() {
        let grid = lambda_grid(1.0, 0.5, 3).unwrap();
        let rows = vec![vec![1.0, 1.0, 1.0, 1.0, f64::NAN]; 3];
        assert_eq!(one_se_select(&rows, &grid).unwrap(), 1.0);
    }

    #[test]
    fn one_se_dominant_lambda() {
        let grid = lambda_grid(1.0, 0.5, 2).unwrap();
        let rows = vec![
            vec![1.0, 10.0, 2.0, f64::NAN],
            vec![1.1, 10.1, 2.1, f64::NAN],
            vec![0.9, 9.9, 1.9, f64::NAN],
        ];
        assert_eq!(one_se_select(&rows, &grid).unwrap(), 0.5);
    }

    #[test]
    fn one_se_hand_computed() {
        let grid = vec![4.0, 2.0, 1.0, f64::INFINITY];
        let rows = vec![
            vec![1.0, 2.0, 3.0, f64::NAN],
            vec![2.0, 2.5, 3.5, f64::NAN],
            vec![1.5, 2.0, 2.0, f64::NAN],
        ];
        // column means 1.5, 2.1667, 2.8333; at the best column the sample
        // variance is ((0.1667)² + (0.6667)² + (0.8333)²)/2 = 0.58333,
        // SE = sqrt(0.58333/3) = 0.44096, threshold 2.39237 → only λ = 1
        assert_eq!(one_se_select(&rows, &grid).unwrap(), 1.0);
        let rows2 = vec![
            vec![1.0, 2.6, 3.0, f64::NAN],
            vec![2.0, 2.5, 3.5, f64::NAN],
            vec![1.5, 2.2, 2.0, f64::NAN],
        ];
        // column 1 mean 2.4333 ≥ 2.39237 → λ = 2
        assert_eq!(one_se_select(&rows2, &grid).unwrap(), 2.0);
        assert!(one_se_select(&rows[..1], &grid).is_err());
    }

    #[test]
    fn score_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a2 = random_spd(&mut rng, 8, 0.0);
            let b2 = random_spd(&mut rng, 8, 0.2);
            let u = random_matrix(&mut rng, 8, 3);
            let (v, _) = qr_thin(&random_matrix(&mut rng, 3, 3)).unwrap();
            let s1 = cv_score(&u, &a2, &b2);
            let s2 = cv_score(&(&u * v.as_matrix()), &a2, &b2);
            assert_abs_diff_eq!(s1, s2, epsilon = 1e-9 * s1.abs().max(1.0));
        }
    }

    fn spiked(p: usize) -> SymMatrix {
        // diag(5,4,1,…) plus a spike on e1 so the top eigenvector is exactly e1
        let mut a = DMatrix::from_diagonal_element(p, p, 1.0);
        a[(0, 0)] = 5.0 + 3.0;
        a[(1, 1)] = 4.0;
        a[(1, 2)] = 0.5;
        a[(2, 1)] = 0.5;
        SymMatrix::new(a).unwrap()
    }

    #[test]
    fn selection_on_spiked_diagonal() {
        let p = 8;
        let a = spiked(p);
        let pair = GepPair::with_identity_b(a);
        let mut e1 = DMatrix::zeros(p, 1);
        e1[0] = 1.0;
        for method in [Method::Poi, Method::FastPoi] {
            let (rep, est) = select_lambda(
                &pair,
                &pair,
                1,
                PenaltyKind::GroupRow,
                method,
                &TuneConfig::default(),
            )
            .unwrap();
            assert_eq!(est.support, vec![0]);
            let smallest = rep.grid[rep.grid.len() - 2];
            let at_small = fit(
                method,
                &pair,
                1,
                &PenaltySpec::group(smallest).unwrap(),
                &OuterConfig::default(),
            )
            .unwrap();
            let d_sel = projection_distance(est.q.as_matrix(), &e1).unwrap();
            let d_small = projection_distance(at_small.q.as_matrix(), &e1).unwrap();
            assert!(d_sel <= d_small + 1e-12);
            assert!(rep.scores.last().unwrap().is_nan());
            assert_eq!(rep.scores.len(), 33);
        }
    }

    #[test]
    fn training_score_is_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_spd(&mut rng, 10, 0.0);
        let b = random_spd(&mut rng, 10, 0.5);
        let pair = GepPair::new(a, b).unwrap();
        let grid = [1e-3, f64::INFINITY];
        let (rep, est) = select_on_grid(
            &pair,
            &pair,
            2,
            PenaltyKind::ElementLasso,
            Method::Poi,
            &grid,
            &TuneConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.selected_index, 0);
        assert_abs_diff_eq!(rep.scores[0], est.eigenvalues.sum(), epsilon = 1e-8);
    }

    #[test]
    fn all_nan_is_tuning_failure() {
        let pair = GepPair::with_identity_b(spiked(4));
        let err = select_on_grid(
            &pair,
            &pair,
            1,
            PenaltyKind::GroupRow,
            Method::Poi,
            &[1e6, f64::INFINITY],
            &TuneConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GepError::TuningFailed(_)));
    }

    #[test]
    fn sequential_and_parallel_reports_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let train =
            GepPair::new(random_spd(&mut rng, 12, 0.0), random_spd(&mut rng, 12, 0.4)).unwrap();
        let tune =
            GepPair::new(random_spd(&mut rng, 12, 0.0), random_spd(&mut rng, 12, 0.4)).unwrap();
        let run = |exec| {
            let cfg = TuneConfig {
                steps: 10,
                exec,
                ..TuneConfig::default()
            };
            select_lambda(&train, &tune, 2, PenaltyKind::GroupRow, Method::Poi, &cfg)
                .unwrap()
                .0
        };
        let s = run(Execution::Sequential);
        let p = run(Execution::Parallel);
        assert_eq!(s.selected_index, p.selected_index);
        for (x, y) in s.scores.iter().zip(&p.scores) {
            assert!(x == y || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn multi_split_reports_one_se() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let splits: Vec<_> = (0..3)
            .map(|_| {
                let mut a = spiked(6).into_inner();
                a += random_matrix(&mut rng, 6, 6).map(|v| v * 0.01);
                let a = SymMatrix::new(a).unwrap();
                let mut t = spiked(6).into_inner();
                t += random_matrix(&mut rng, 6, 6).map(|v| v * 0.01);
                let t = SymMatrix::new(t).unwrap();
                (GepPair::with_identity_b(a), GepPair::with_identity_b(t))
            })
            .collect();
        let cfg = TuneConfig {
            steps: 8,
            ..TuneConfig::default()
        };
        let rep =
            select_multi_split(&splits, 1, PenaltyKind::ElementLasso, Method::Poi, &cfg).unwrap();
        let one_se = rep.one_se_lambda.unwrap();
        assert!(one_se >= rep.selected_lambda);
        assert_eq!(rep.per_split_scores.as_ref().unwrap().len(), 3);
    }
}
