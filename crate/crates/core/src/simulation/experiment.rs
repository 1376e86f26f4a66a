//! Repeated simulation experiments: generate data, fit along a λ grid, tune
//! by cross-validation, and record distances to the truth.
//!
//! Each repetition draws from its own ChaCha8 stream, seeded by the master
//! seed and selected by the repetition index, so results do not depend on the
//! order or thread in which repetitions run.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classify::classify_lda;
use super::models::{gen_taichi, LdaPopulation, Model, PcaTruth, SpikeScale};
use crate::applications::{lda_pair, pca_pair, sir_pair, PcaScale};
use crate::error::{GepError, Result};
use crate::exec::{map_indexed, Execution};
use crate::gep::{lambda_max, GepPair, Method, OuterConfig};
use crate::linalg::projection_distance;
use crate::penalty::PenaltyKind;
use crate::tuning::{best_index, fit_path, lambda_grid, score_path};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Pca,
    Lda,
    Taichi,
}

impl std::str::FromStr for Family {
    type Err = GepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pca" => Ok(Family::Pca),
            "lda" => Ok(Family::Lda),
            "taichi" | "tai-chi" | "tai_chi" => Ok(Family::Taichi),
            _ => Err(GepError::InvalidInput(format!(
                "unknown family {s:?}; expected pca, lda or taichi"
            ))),
        }
    }
}

/// An experiment definition. For the LDA family the three sample sizes are
/// per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    pub d: usize,
    pub p: usize,
    pub n_train: usize,
    pub n_tune: usize,
    pub n_test: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub method: Method,
    pub penalty: PenaltyKind,
    pub grid_ratio: f64,
    pub grid_steps: usize,
    /// Fit at the single level `lambda_rel · λ_max` instead of tuning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_rel: Option<f64>,
    pub max_outer: usize,
    pub outer_tol: f64,
    /// PCA family only.
    #[serde(default)]
    pub pca_spike: SpikeScale,
}

impl ExperimentSpec {
    /// Defaults for a family: the PCA and LDA protocols with Model I, and the
    /// Tai-Chi SIR example at `λ = λ_max / 2`.
    pub fn defaults(family: Family) -> Self {
        let outer = OuterConfig::default();
        let base = ExperimentSpec {
            family,
            model: None,
            d: 3,
            p: 200,
            n_train: 100,
            n_tune: 100,
            n_test: 0,
            repetitions: 100,
            seed: 1,
            method: Method::Poi,
            penalty: PenaltyKind::GroupRow,
            grid_ratio: crate::tuning::DEFAULT_RATIO,
            grid_steps: crate::tuning::DEFAULT_STEPS,
            lambda_rel: None,
            max_outer: outer.max_outer,
            outer_tol: outer.outer_tol,
            pca_spike: SpikeScale::default(),
        };
        match family {
            Family::Pca => ExperimentSpec {
                model: Some(Model::I),
                ..base
            },
            Family::Lda => ExperimentSpec {
                model: Some(Model::I),
                d: 2,
                n_train: 30,
                n_tune: 30,
                n_test: 600,
                method: Method::FastPoi,
                ..base
            },
            Family::Taichi => ExperimentSpec {
                d: 2,
                p: 100,
                n_train: 1000,
                n_tune: 0,
                repetitions: 10,
                lambda_rel: Some(0.5),
                ..base
            },
        }
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| GepError::InvalidInput(format!("invalid value {v:?} for {key}")))
        }
        let v = value.trim();
        match key.trim() {
            "family" => {
                let family = v.parse()?;
                if family != self.family {
                    *self = ExperimentSpec::defaults(family);
                }
            }
            "model" => {
                let model: Model = v.parse()?;
                if self.family == Family::Lda {
                    let classes = if model == Model::V { 4 } else { 3 };
                    self.d = classes - 1;
                }
                self.model = Some(model);
            }
            "d" => self.d = num(key, v)?,
            "p" => self.p = num(key, v)?,
            "n" | "n_train" => self.n_train = num(key, v)?,
            "n_tune" => self.n_tune = num(key, v)?,
            "n_test" => self.n_test = num(key, v)?,
            "reps" | "repetitions" => self.repetitions = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "method" => self.method = v.parse()?,
            "penalty" => self.penalty = v.parse()?,
            "grid_ratio" => self.grid_ratio = num(key, v)?,
            "grid_steps" | "grid_len" => self.grid_steps = num(key, v)?,
            "lambda_rel" => {
                self.lambda_rel = match v {
                    "" | "none" | "null" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "max_outer" => self.max_outer = num(key, v)?,
            "outer_tol" => self.outer_tol = num(key, v)?,
            "pca_spike" => self.pca_spike = v.parse()?,
            other => return Err(GepError::InvalidInput(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines. `#` starts a comment. `family` must come
    /// first if present, since it resets the other fields to its defaults.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::defaults(Family::Pca);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                GepError::InvalidInput(format!("line {}: expected key = value", lineno + 1))
            })?;
            spec.set(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Parses a JSON object. Missing fields take the defaults of its family.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| GepError::InvalidInput(format!("experiment JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| GepError::InvalidInput("experiment JSON must be an object".into()))?;
        let mut spec = ExperimentSpec::defaults(Family::Pca);
        let text_of = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Null => "none".to_string(),
            other => other.to_string(),
        };
        for first in ["family", "model"] {
            if let Some(v) = obj.get(first) {
                spec.set(first, &text_of(v))?;
            }
        }
        for (k, v) in obj {
            if k != "family" && k != "model" {
                spec.set(k, &text_of(v))?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GepError::InvalidInput(msg));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.d == 0 || self.d >= self.p {
            return bad(format!(
                "need 1 <= d < p, got d = {}, p = {}",
                self.d, self.p
            ));
        }
        if !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) {
            return bad(format!(
                "grid_ratio must lie in (0, 1), got {}",
                self.grid_ratio
            ));
        }
        if let Some(r) = self.lambda_rel {
            if !(r >= 0.0) || !r.is_finite() {
                return bad(format!("lambda_rel must be non-negative, got {r}"));
            }
        }
        if self.max_outer == 0 || !(self.outer_tol > 0.0) {
            return bad("max_outer must be >= 1 and outer_tol positive".into());
        }
        if self.n_train < 2 {
            return bad(format!("n_train must be at least 2, got {}", self.n_train));
        }
        if self.lambda_rel.is_none() && self.n_tune < 2 {
            return bad("cross-validation needs n_tune >= 2 (or set lambda_rel)".into());
        }
        match self.family {
            Family::Pca => match self.model {
                Some(Model::I | Model::II | Model::III) => {}
                other => {
                    return bad(format!(
                        "PCA family needs model I, II or III, got {other:?}"
                    ))
                }
            },
            Family::Lda => {
                if self.model.is_none() {
                    return bad("LDA family needs a model (I to V)".into());
                }
                if self.n_test == 0 {
                    return bad("LDA family needs n_test >= 1".into());
                }
            }
            Family::Taichi => {
                if self.model.is_some() {
                    return bad("the Tai-Chi family takes no model".into());
                }
            }
        }
        Ok(())
    }

    /// Short label such as `PCA-I POI-C`.
    pub fn label(&self) -> String {
        let fam = match self.family {
            Family::Pca => "PCA",
            Family::Lda => "LDA",
            Family::Taichi => "TaiChi",
        };
        let model = self.model.map(|m| format!("-{m}")).unwrap_or_default();
        format!(
            "{fam}{model} {}-{}",
            self.method.label(),
            self.penalty.suffix()
        )
    }

    fn outer(&self) -> OuterConfig {
        OuterConfig {
            max_outer: self.max_outer,
            outer_tol: self.outer_tol,
            ..OuterConfig::default()
        }
    }
}

/// Outcome of one repetition. Distances and λ are NaN for a failed
/// repetition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    /// Smallest distance to the truth over the whole grid.
    pub min_distance: f64,
    /// Distance to the truth at the selected λ.
    pub cv_distance: f64,
    pub selected_lambda: f64,
    pub lambda_max: f64,
    pub support_size: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclassification: Option<f64>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RepetitionResult {
    fn failed(repetition: usize, err: &GepError) -> Self {
        RepetitionResult {
            repetition,
            min_distance: f64::NAN,
            cv_distance: f64::NAN,
            selected_lambda: f64::NAN,
            lambda_max: f64::NAN,
            support_size: 0,
            true_positives: 0,
            false_positives: 0,
            misclassification: None,
            converged: false,
            error: Some(err.to_string()),
        }
    }
}

/// Mean and standard error (sample standard deviation over `√n`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                se: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Stat { mean, se, count: n }
    }
}

/// Aggregates over the successful repetitions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregates {
    pub min_distance: Stat,
    pub cv_distance: Stat,
    pub selected_lambda: Stat,
    pub support_size: Stat,
    pub true_positives: Stat,
    pub false_positives: Stat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclassification: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub label: String,
    pub spec: ExperimentSpec,
    pub repetitions: Vec<RepetitionResult>,
    pub failed: usize,
    pub aggregates: Aggregates,
}

const CSV_HEADER: &str = "repetition,min_distance,cv_distance,selected_lambda,lambda_max,\
support_size,true_positives,false_positives,misclassification,converged,error";

fn csv_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ExperimentReport {
    fn aggregate(spec: &ExperimentSpec, reps: Vec<RepetitionResult>) -> Self {
        let ok: Vec<&RepetitionResult> = reps.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&RepetitionResult) -> f64| {
            Stat::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        let misclassification = (spec.family == Family::Lda).then(|| {
            Stat::of(
                &ok.iter()
                    .filter_map(|r| r.misclassification)
                    .collect::<Vec<_>>(),
            )
        });
        let aggregates = Aggregates {
            min_distance: col(|r| r.min_distance),
            cv_distance: col(|r| r.cv_distance),
            selected_lambda: col(|r| r.selected_lambda),
            support_size: col(|r| r.support_size as f64),
            true_positives: col(|r| r.true_positives as f64),
            false_positives: col(|r| r.false_positives as f64),
            misclassification,
        };
        ExperimentReport {
            label: spec.label(),
            spec: spec.clone(),
            failed: reps.len() - ok.len(),
            repetitions: reps,
            aggregates,
        }
    }

    /// One row per repetition, then a `mean` row and an `se` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.repetitions {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.repetition,
                csv_num(r.min_distance),
                csv_num(r.cv_distance),
                csv_num(r.selected_lambda),
                csv_num(r.lambda_max),
                r.support_size,
                r.true_positives,
                r.false_positives,
                r.misclassification.map(csv_num).unwrap_or_default(),
                r.converged,
                csv_text(r.error.as_deref().unwrap_or("")),
            );
        }
        let a = &self.aggregates;
        for (name, pick) in [
            ("mean", (|s: &Stat| s.mean) as fn(&Stat) -> f64),
            ("se", |s: &Stat| s.se),
        ] {
            let _ = writeln!(
                out,
                "{name},{},{},{},,{},{},{},{},,",
                csv_num(pick(&a.min_distance)),
                csv_num(pick(&a.cv_distance)),
                csv_num(pick(&a.selected_lambda)),
                csv_num(pick(&a.support_size)),
                csv_num(pick(&a.true_positives)),
                csv_num(pick(&a.false_positives)),
                a.misclassification
                    .as_ref()
                    .map(|s| csv_num(pick(s)))
                    .unwrap_or_default(),
            );
        }
        out
    }
}

/// Random stream of repetition `rep`.
pub fn repetition_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

struct Problem {
    train: GepPair,
    tune: Option<GepPair>,
    truth: DMatrix<f64>,
    support: Vec<usize>,
    lda: Option<(
        crate::applications::LabeledData,
        crate::applications::LabeledData,
    )>,
}

fn build_problem(spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<Problem> {
    let tuned = spec.lambda_rel.is_none();
    match spec.family {
        Family::Pca => {
            let model = spec.model.unwrap_or(Model::I);
            let truth = PcaTruth::with_spike(model, spec.d, spec.p, spec.pca_spike, rng)?;
            let x_train = truth.sample(spec.n_train, rng);
            let tune = if tuned {
                Some(pca_pair(
                    &truth.sample(spec.n_tune, rng),
                    PcaScale::Covariance,
                )?)
            } else {
                None
            };
            Ok(Problem {
                train: pca_pair(&x_train, PcaScale::Covariance)?,
                tune,
                truth: truth.basis.into_inner(),
                support: truth.support,
                lda: None,
            })
        }
        Family::Lda => {
            let pop = LdaPopulation::new(spec.model.unwrap_or(Model::I), spec.p)?;
            let train = pop.sample(spec.n_train, rng)?;
            let tune = if tuned {
                Some(lda_pair(&pop.sample(spec.n_tune, rng)?)?)
            } else {
                None
            };
            let test = pop.sample(spec.n_test, rng)?;
            Ok(Problem {
                train: lda_pair(&train)?,
                tune,
                truth: pop.truth.into_inner(),
                support: pop.support,
                lda: Some((train, test)),
            })
        }
        Family::Taichi => {
            let data = gen_taichi(spec.n_train, spec.p, rng)?;
            let tune = if tuned {
                Some(sir_pair(&gen_taichi(spec.n_tune, spec.p, rng)?, 2)?)
            } else {
                None
            };
            let mut truth = DMatrix::zeros(spec.p, 2);
            truth[(0, 0)] = 1.0;
            truth[(1, 1)] = 1.0;
            Ok(Problem {
                train: sir_pair(&data, 2)?,
                tune,
                truth,
                support: vec![0, 1],
                lda: None,
            })
        }
    }
}

/// Runs one repetition.
pub fn run_repetition(
    spec: &ExperimentSpec,
    rep: usize,
    exec: Execution,
) -> Result<RepetitionResult> {
    let mut rng = repetition_rng(spec.seed, rep);
    let problem = build_problem(spec, &mut rng)?;
    let lmax = lambda_max(&problem.train, spec.method, spec.penalty, spec.d)?;
    let grid = match spec.lambda_rel {
        Some(rel) => vec![rel * lmax],
        None => lambda_grid(lmax, spec.grid_ratio, spec.grid_steps)?,
    };
    let path = fit_path(
        &problem.train,
        spec.d,
        spec.penalty,
        spec.method,
        &grid,
        &spec.outer(),
        exec,
    );
    let distances: Vec<f64> = path
        .iter()
        .map(|est| match est {
            Ok(e) => projection_distance(e.q.as_matrix(), &problem.truth).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        })
        .collect();
    let min_distance = distances
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NAN, f64::min);

    let selected = match &problem.tune {
        Some(tune) => {
            let (scores, _) = score_path(&path, tune);
            best_index(&scores).ok_or_else(|| {
                GepError::TuningFailed("no grid point produced a finite score".into())
            })?
        }
        None => 0,
    };
    let est = path[selected].as_ref().map_err(Clone::clone)?;
    let true_positives = est
        .support
        .iter()
        .filter(|i| problem.support.contains(i))
        .count();

    let misclassification = match &problem.lda {
        Some((train, test)) => {
            let pred = classify_lda(&train.project(&est.u)?, &test.project(&est.u)?)?;
            Some(pred.misclassification)
        }
        None => None,
    };

    Ok(RepetitionResult {
        repetition: rep,
        min_distance,
        cv_distance: distances[selected],
        selected_lambda: grid[selected],
        lambda_max: lmax,
        support_size: est.support.len(),
        true_positives,
        false_positives: est.support.len() - true_positives,
        misclassification,
        converged: est.converged,
        error: None,
    })
}

/// Runs every repetition. A failing repetition is recorded in the report
/// rather than aborting the experiment.
pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentReport> {
    spec.validate()?;
    let reps = map_indexed(exec, spec.repetitions, |rep| {
        run_repetition(spec, rep, exec).unwrap_or_else(|e| RepetitionResult::failed(rep, &e))
    });
    Ok(ExperimentReport::aggregate(spec, reps))
}
