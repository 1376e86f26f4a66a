//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sparse_gep::gep::{
    eigenvalues_ls, fast_poi, lambda_max_fast, poi, rayleigh_eigenvalues, GepPair, OuterConfig,
};
use sparse_gep::linalg::{dense_gep_subspace, projection_distance, qr_thin, small_gep};
use sparse_gep::penalty::{
    kkt_residual, solve_group_rows_traced, solve_lasso_column_traced, solve_penalized,
    InnerSolveConfig, PenaltyKind, PenaltySpec,
};
use sparse_gep::simulation::{run_experiment, ExperimentReport, ExperimentSpec, Family, Model};
use sparse_gep::tuning::cv_score;
use sparse_gep::{Execution, GepError, SymMatrix};

// Tolerances, fixed.
const ORACLE_DISTANCE_TOL: f64 = 1e-6;
const KKT_REL_TOL: f64 = 1e-6;
const OBJECTIVE_TOL: f64 = 1e-8;
const PROP2_TOL: f64 = 1e-6;
const ROTATION_TOL: f64 = 1e-9;
const METRIC_TOL: f64 = 1e-10;
const EIGEN_ESTIMATOR_TOL: f64 = 1e-8;
const DESCENT_SLACK: f64 = 1e-12;

const C1_RUNTIME: Duration = Duration::from_secs(10);
const C2_RUNTIME: Duration = Duration::from_secs(30);
const C4_RUNTIME: Duration = Duration::from_secs(15 * 60);

const TABLE_REPS: usize = 30;
const TABLE_SEED: u64 = 7;
const PCA_I_MIN_DISTANCE: (f64, f64) = (0.159, 0.05);
const PCA_II_LASSO_MIN_DISTANCE: (f64, f64) = (0.106, 0.05);
const PCA_I_CV_DISTANCE: (f64, f64) = (0.162, 0.06);
const LDA_I_DISTANCE: (f64, f64) = (0.313, 0.06);
const LDA_I_MISCLASSIFICATION: (f64, f64) = (0.0727, 0.03);

// Tai-Chi proxy threshold, calibrated once on seeds 0..10 and frozen.
const TAICHI_MAX_DISTANCE: f64 = 0.3;
const TAICHI_MIN_PASSING: usize = 8;
const TAICHI_SEEDS: usize = 10;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    qr_thin(&gaussian(rng, p, p)).unwrap().0.into_inner()
}

fn random_spd(rng: &mut ChaCha8Rng, p: usize, shift: f64) -> DMatrix<f64> {
    let g = gaussian(rng, p, p);
    &g * g.transpose() / p as f64 + DMatrix::identity(p, p) * shift
}

fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(m).unwrap()
}

/// `(A, B, X)` with `AX = BXΛ`, `XᵀBX = I`, the top `d` generalized
/// eigenvalues in `[2, 3]` and the rest in `[0, 1]`.
fn planted_gep(
    rng: &mut ChaCha8Rng,
    p: usize,
    d: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let b = random_spd(rng, p, 0.5);
    let l = b.clone().cholesky().unwrap().l();
    let o = random_orthogonal(rng, p);
    let x = l.transpose().solve_upper_triangular(&o).unwrap();
    let lambdas = DVector::from_fn(p, |i, _| {
        if i < d {
            2.0 + rng.random::<f64>()
        } else {
            rng.random::<f64>()
        }
    });
    let bx = &b * &x;
    let a = &bx * DMatrix::from_diagonal(&lambdas) * bx.transpose();
    (a, b, x)
}

fn tight_outer() -> OuterConfig {
    OuterConfig {
        max_outer: 10_000,
        outer_tol: 1e-11,
        inner: InnerSolveConfig {
            max_sweeps: 1_000_000,
            tol: 1e-13,
        },
        ..OuterConfig::default()
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let zero = PenaltySpec::group(0.0).unwrap();
    let (mut worst_poi, mut worst_fast) = (0.0f64, 0.0f64);
    for inst in 0..50 {
        let p = [10, 20, 30][inst % 3];
        let d = [1, 2, 3][(inst / 3) % 3];
        let (a, b, x) = planted_gep(&mut rng, p, d);
        let pair = GepPair::new(sym(a.clone()), sym(b.clone())).unwrap();
        let dense = dense_gep_subspace(pair.a(), pair.b(), d).unwrap();
        let planted = x.columns(0, d).into_owned();
        let est = poi(&pair, d, &zero, &tight_outer()).unwrap();
        worst_poi = worst_poi
            .max(projection_distance(est.q.as_matrix(), dense.as_matrix()).unwrap())
            .max(projection_distance(est.q.as_matrix(), &planted).unwrap());

        let g = gaussian(&mut rng, p, d);
        let pair_b = GepPair::new(sym(&g * g.transpose()), sym(b)).unwrap();
        let dense_b = dense_gep_subspace(pair_b.a(), pair_b.b(), d).unwrap();
        let est_b = fast_poi(&pair_b, d, &zero, &tight_outer()).unwrap();
        worst_fast =
            worst_fast.max(projection_distance(est_b.q.as_matrix(), dense_b.as_matrix()).unwrap());
    }
    let elapsed = start.elapsed();
    outcome(
        worst_poi <= ORACLE_DISTANCE_TOL && worst_fast <= ORACLE_DISTANCE_TOL && elapsed < C1_RUNTIME,
        format!(
            "oracle equivalence at lambda = 0: max distance POI {worst_poi:.2e}, FastPOI {worst_fast:.2e} (tol {ORACLE_DISTANCE_TOL:.0e}); {elapsed:.2?}"
        ),
    )
}

fn oracle_objective(
    z: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    kind: PenaltyKind,
    lam: f64,
) -> f64 {
    let mut quad = 0.0;
    for j in 0..z.ncols() {
        for i in 0..z.nrows() {
            let mut bz = 0.0;
            for k in 0..z.nrows() {
                bz += b[(i, k)] * z[(k, j)];
            }
            quad += z[(i, j)] * (0.5 * bz - m[(i, j)]);
        }
    }
    let pen = match kind {
        PenaltyKind::ElementLasso => z.iter().map(|v| v.abs()).sum::<f64>(),
        PenaltyKind::GroupRow => (0..z.nrows())
            .map(|i| {
                (0..z.ncols())
                    .map(|j| z[(i, j)].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum(),
    };
    quad + lam * pen
}

/// Accelerated proximal gradient with the strong-convexity momentum, run to
/// a fixed point.
fn prox_gradient_oracle(
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    kind: PenaltyKind,
    lam: f64,
) -> DMatrix<f64> {
    let eig = b.clone().symmetric_eigenvalues();
    let (mu, l) = (eig.min(), eig.max());
    let step = 1.0 / l;
    let beta = (l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt());
    let prox = |v: DMatrix<f64>| -> DMatrix<f64> {
        match kind {
            PenaltyKind::ElementLasso => v.map(|x| x.signum() * (x.abs() - step * lam).max(0.0)),
            PenaltyKind::GroupRow => {
                let mut out = v.clone();
                for i in 0..v.nrows() {
                    let n = v.row(i).norm();
                    let s = if n > 0.0 {
                        (1.0 - step * lam / n).max(0.0)
                    } else {
                        0.0
                    };
                    out.row_mut(i).scale_mut(s);
                }
                out
            }
        }
    };
    let mut x = DMatrix::zeros(m.nrows(), m.ncols());
    let mut y = x.clone();
    for _ in 0..200_000 {
        let grad = b * &y - m;
        let next = prox(&y - grad * step);
        let change = (&next - &x).amax();
        y = &next + (&next - &x) * beta;
        x = next;
        if change <= 1e-15 {
            break;
        }
    }
    x
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cfg = InnerSolveConfig {
        max_sweeps: 1_000_000,
        tol: 1e-13,
    };
    let mut worst_kkt = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut failures = 0;
    for kind in [PenaltyKind::ElementLasso, PenaltyKind::GroupRow] {
        for inst in 0..200 {
            let p = rng.random_range(2..=50);
            let d = rng.random_range(1..=5);
            let shift = rng.random_range(0.1..1.0);
            let b = random_spd(&mut rng, p, shift);
            let m = gaussian(&mut rng, p, d);
            let lmax = lambda_max_fast(&m, kind);
            let lam = match inst {
                0 => 0.0,
                1 => lmax,
                _ => rng.random::<f64>() * lmax,
            };
            let pen = PenaltySpec::uniform(kind, lam, d).unwrap();
            let z = solve_penalized(&b, &m, &pen, &cfg, None).unwrap().z;
            let kkt = kkt_residual(&z, &b, &m, &pen).unwrap() / (1.0 + m.amax());
            let oracle = prox_gradient_oracle(&b, &m, kind, lam);
            let gap = (oracle_objective(&z, &b, &m, kind, lam)
                - oracle_objective(&oracle, &b, &m, kind, lam))
            .abs();
            worst_kkt = worst_kkt.max(kkt);
            worst_obj = worst_obj.max(gap);
            if kkt > KKT_REL_TOL || gap > OBJECTIVE_TOL {
                failures += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < C2_RUNTIME,
        format!(
            "inner-solver optimality on 400 instances: max scaled KKT {worst_kkt:.2e} (tol {KKT_REL_TOL:.0e}), max objective gap {worst_obj:.2e} (tol {OBJECTIVE_TOL:.0e}), {failures} failing; {elapsed:.2?}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = OuterConfig::default();
    let mut bad = Vec::new();
    for kind in [PenaltyKind::ElementLasso, PenaltyKind::GroupRow] {
        for inst in 0..50 {
            let p = rng.random_range(5..=40);
            let d = rng.random_range(1..=4.min(p - 1));
            let a = gaussian(&mut rng, p, p);
            let pair =
                GepPair::new(sym(&a + a.transpose()), sym(random_spd(&mut rng, p, 0.2))).unwrap();
            let v = pair.top_eigvecs_of_a(d);
            let lmax = lambda_max_fast(&v, kind);

            let above = PenaltySpec::uniform(kind, 1.0001 * lmax, d).unwrap();
            let z_above = solve_penalized(pair.b().as_matrix(), &v, &above, &cfg.inner, Some(&v))
                .unwrap()
                .z;
            let fit_above = fast_poi(&pair, d, &above, &cfg);
            let zero_ok = z_above.iter().all(|&x| x == 0.0)
                && matches!(fit_above, Err(GepError::OverPenalized { .. }));

            let below = PenaltySpec::uniform(kind, 0.99 * lmax, d).unwrap();
            let z_below = solve_penalized(pair.b().as_matrix(), &v, &below, &cfg.inner, Some(&v))
                .unwrap()
                .z;
            let nonzero_ok =
                z_below.iter().any(|&x| x != 0.0) && fast_poi(&pair, d, &below, &cfg).is_ok();
            if !(zero_ok && nonzero_ok) {
                bad.push(format!("{kind:?}#{inst}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "lambda_max (FastPOI, lasso and group): zero at 1.0001x, nonzero at 0.99x on 100 instances; failures {bad:?}"
        ),
    )
}

fn within(value: f64, (target, tol): (f64, f64)) -> bool {
    (value - target).abs() <= tol
}

fn table_spec(family: Family, model: Model, kind: PenaltyKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::defaults(family);
    spec.set("model", &model.to_string()).unwrap();
    spec.penalty = kind;
    spec.repetitions = TABLE_REPS;
    spec.seed = TABLE_SEED;
    spec
}

fn criterion_4_and_5() -> (Outcome, Outcome) {
    let start = Instant::now();
    let spec_i = table_spec(Family::Pca, Model::I, PenaltyKind::GroupRow);
    let r1 = run_experiment(&spec_i, Execution::Sequential).unwrap();
    let spec_ii = table_spec(Family::Pca, Model::II, PenaltyKind::ElementLasso);
    let r2 = run_experiment(&spec_ii, Execution::Sequential).unwrap();
    let elapsed = start.elapsed();

    let m1 = r1.aggregates.min_distance;
    let m2 = r2.aggregates.min_distance;
    let c1 = r1.aggregates.cv_distance;
    let c4 = outcome(
        within(m1.mean, PCA_I_MIN_DISTANCE)
            && within(m2.mean, PCA_II_LASSO_MIN_DISTANCE)
            && r1.failed == 0
            && r2.failed == 0
            && elapsed < C4_RUNTIME,
        format!(
            "PCA min distance ({TABLE_REPS} reps): PCA-I POI-C min distance {:.4} (SE {:.4}) vs {} +- {}; PCA-II POI-L {:.4} (SE {:.4}) vs {} +- {}; {elapsed:.2?} single-threaded",
            m1.mean, m1.se, PCA_I_MIN_DISTANCE.0, PCA_I_MIN_DISTANCE.1,
            m2.mean, m2.se, PCA_II_LASSO_MIN_DISTANCE.0, PCA_II_LASSO_MIN_DISTANCE.1,
        ),
    );
    let c5 = outcome(
        within(c1.mean, PCA_I_CV_DISTANCE) && r1.failed == 0,
        format!(
            "PCA cross-validated distance ({TABLE_REPS} reps): PCA-I POI-C cross-validated distance {:.4} (SE {:.4}) vs {} +- {}",
            c1.mean, c1.se, PCA_I_CV_DISTANCE.0, PCA_I_CV_DISTANCE.1
        ),
    );
    (c4, c5)
}

fn criterion_6() -> Outcome {
    let spec = table_spec(Family::Lda, Model::I, PenaltyKind::GroupRow);
    let r = run_experiment(&spec, Execution::Parallel).unwrap();
    let dist = r.aggregates.cv_distance;
    let mis = r.aggregates.misclassification.unwrap();
    outcome(
        within(dist.mean, LDA_I_DISTANCE) && within(mis.mean, LDA_I_MISCLASSIFICATION) && r.failed == 0,
        format!(
            "LDA distance and error ({TABLE_REPS} reps, test n = {} per class): LDA-I FastPOI-C distance {:.4} (SE {:.4}) vs {} +- {}; misclassification {:.2}% vs {:.2}% +- {:.0} pp",
            spec.n_test,
            dist.mean, dist.se, LDA_I_DISTANCE.0, LDA_I_DISTANCE.1,
            100.0 * mis.mean, 100.0 * LDA_I_MISCLASSIFICATION.0, 100.0 * LDA_I_MISCLASSIFICATION.1
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let zero = PenaltySpec::group(0.0).unwrap();
    let (mut worst_a, mut worst_b) = (0.0f64, 0.0f64);
    for inst in 0..100 {
        let p = 5 + inst % 26;
        let d = 1 + inst % 4;
        // (a) B = I, A non-negative definite with a gap after the d-th eigenvalue
        let o = random_orthogonal(&mut rng, p);
        let vals = DVector::from_fn(p, |i, _| {
            if i < d {
                2.0 + rng.random::<f64>()
            } else {
                rng.random::<f64>()
            }
        });
        let a = &o * DMatrix::from_diagonal(&vals) * o.transpose();
        let pair = GepPair::with_identity_b(sym(a));
        let v = pair.top_eigvecs_of_a(d);
        let dense = dense_gep_subspace(pair.a(), pair.b(), d).unwrap();
        worst_a = worst_a.max(projection_distance(&v, dense.as_matrix()).unwrap());

        // (b) B positive definite, rank(A) = d
        let g = gaussian(&mut rng, p, d);
        let b = random_spd(&mut rng, p, 0.3);
        let pair = GepPair::new(sym(&g * g.transpose()), sym(b.clone())).unwrap();
        let v = pair.top_eigvecs_of_a(d);
        let binv_v = b.clone().cholesky().unwrap().solve(&v);
        let dense = dense_gep_subspace(pair.a(), pair.b(), d).unwrap();
        let fast = fast_poi(&pair, d, &zero, &tight_outer()).unwrap();
        worst_b = worst_b
            .max(projection_distance(&binv_v, dense.as_matrix()).unwrap())
            .max(projection_distance(fast.q.as_matrix(), dense.as_matrix()).unwrap());
    }
    outcome(
        worst_a <= PROP2_TOL && worst_b <= PROP2_TOL,
        format!(
            "span(B^-1 V) equals the dense GEP subspace on 100 instances: case (a) max {worst_a:.2e}, case (b) max {worst_b:.2e} (tol {PROP2_TOL:.0e})"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut notes = Vec::new();
    let mut pass = true;

    // CV score under U -> UV
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.random_range(4..=20);
        let d = rng.random_range(1..=3);
        let a2 = sym(random_spd(&mut rng, p, 0.0));
        let b2 = sym(random_spd(&mut rng, p, 0.2));
        let u = gaussian(&mut rng, p, d);
        let rot = random_orthogonal(&mut rng, d);
        let s1 = cv_score(&u, &a2, &b2);
        let s2 = cv_score(&(&u * rot), &a2, &b2);
        worst = worst.max((s1 - s2).abs() / s1.abs().max(1.0));
    }
    pass &= worst <= ROTATION_TOL;
    notes.push(format!("cv rotation {worst:.1e}"));

    // projection metric symmetry and invariance
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.random_range(3..=20);
        let d1 = rng.random_range(1..p);
        let d2 = rng.random_range(1..p);
        let u1 = gaussian(&mut rng, p, d1);
        let u2 = gaussian(&mut rng, p, d2);
        let o = random_orthogonal(&mut rng, p);
        let r1 = random_orthogonal(&mut rng, d1);
        let base = projection_distance(&u1, &u2).unwrap();
        let sym_gap = (base - projection_distance(&u2, &u1).unwrap()).abs();
        let rot_gap = (base - projection_distance(&(&o * &u1), &(&o * &u2)).unwrap()).abs();
        let right_gap = (base - projection_distance(&(&u1 * r1), &u2).unwrap()).abs();
        worst = worst.max(sym_gap).max(rot_gap).max(right_gap);
    }
    pass &= worst <= METRIC_TOL;
    notes.push(format!("metric {worst:.1e}"));

    // objective never increases across sweeps
    let mut rises = 0usize;
    let cfg = InnerSolveConfig::default();
    for _ in 0..50 {
        let p = rng.random_range(2..=30);
        let d = rng.random_range(1..=4);
        let b = random_spd(&mut rng, p, 0.1);
        let m = gaussian(&mut rng, p, d);
        let lam = rng.random::<f64>() * lambda_max_fast(&m, PenaltyKind::GroupRow);
        let pen = PenaltySpec::group(lam).unwrap();
        let mut prev = oracle_objective(&DMatrix::zeros(p, d), &b, &m, PenaltyKind::GroupRow, lam);
        solve_group_rows_traced(&b, &m, lam, &cfg, None, &mut |z| {
            let f = oracle_objective(z, &b, &m, PenaltyKind::GroupRow, lam);
            if f > prev + DESCENT_SLACK * (1.0 + prev.abs()) {
                rises += 1;
            }
            prev = f;
        })
        .unwrap();
        let _ = pen;
        let col = m.column(0).into_owned();
        let lam1 = rng.random::<f64>() * col.amax();
        let obj1 = |z: &DVector<f64>| 0.5 * z.dot(&(&b * z)) - z.dot(&col) + lam1 * z.lp_norm(1);
        let mut prev = 0.0f64;
        solve_lasso_column_traced(&b, &col, lam1, &cfg, None, &mut |z| {
            let f = obj1(z);
            if f > prev + DESCENT_SLACK * (1.0 + prev.abs()) {
                rises += 1;
            }
            prev = f;
        })
        .unwrap();
    }
    pass &= rises == 0;
    notes.push(format!("descent violations {rises}"));

    // Rayleigh quotients and least-squares eigenvalues on exact eigenvectors
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.random_range(3..=20);
        let d = rng.random_range(1..p);
        let a = sym(random_spd(&mut rng, p, 0.0));
        let b = sym(random_spd(&mut rng, p, 0.3));
        let sol = small_gep(&a, &b).unwrap();
        let pair = GepPair::new(a, b).unwrap();
        let u = sol.vectors.columns(0, d).into_owned();
        let rq = rayleigh_eigenvalues(&u, &pair).unwrap();
        let ls = eigenvalues_ls(&u, &pair).unwrap();
        for j in 0..d {
            worst = worst.max((rq[j] - ls[j]).abs() / rq[j].abs().max(1.0));
        }
    }
    pass &= worst <= EIGEN_ESTIMATOR_TOL;
    notes.push(format!("eigenvalue estimators {worst:.1e}"));

    // seeded experiments are reproducible byte for byte
    let mut spec = ExperimentSpec::defaults(Family::Pca);
    spec.p = 40;
    spec.repetitions = 1;
    spec.seed = 99;
    let render = |r: &ExperimentReport| (r.to_csv(), serde_json::to_string(r).unwrap());
    let first = render(&run_experiment(&spec, Execution::Parallel).unwrap());
    let second = render(&run_experiment(&spec, Execution::Parallel).unwrap());
    let third = render(&run_experiment(&spec, Execution::Sequential).unwrap());
    let identical = first == second && first == third;
    pass &= identical;
    notes.push(format!("deterministic reports {identical}"));

    outcome(pass, format!("property suite: {}", notes.join(", ")))
}

fn criterion_9() -> Outcome {
    let mut spec = ExperimentSpec::defaults(Family::Taichi);
    spec.repetitions = TAICHI_SEEDS;
    spec.seed = TABLE_SEED;
    let r = run_experiment(&spec, Execution::Parallel).unwrap();
    let distances: Vec<f64> = r.repetitions.iter().map(|x| x.cv_distance).collect();
    let passing = distances
        .iter()
        .filter(|&&v| v <= TAICHI_MAX_DISTANCE)
        .count();
    outcome(
        passing >= TAICHI_MIN_PASSING,
        format!(
            "Tai-Chi SIR + POI-C at lambda_max/2 (n = {}, p = {}): {passing}/{TAICHI_SEEDS} seeds within {TAICHI_MAX_DISTANCE}; distances {:?}",
            spec.n_train,
            spec.p,
            distances.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |id: &'static str, o: Outcome| {
        println!(
            "[{}] criterion {id}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, o));
    };
    let single: [Check; 3] = [("1", criterion_1), ("2", criterion_2), ("3", criterion_3)];
    for (id, f) in single {
        if wanted(id) {
            record(id, f());
        }
    }
    if wanted("4") || wanted("5") {
        let (c4, c5) = criterion_4_and_5();
        record("4", c4);
        record("5", c5);
    }
    let rest: [Check; 4] = [
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9", criterion_9),
    ];
    for (id, f) in rest {
        if wanted(id) {
            record(id, f());
        }
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(id, _)| *id)
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
