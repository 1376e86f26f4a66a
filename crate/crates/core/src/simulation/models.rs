//! Synthetic data generators.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::applications::LabeledData;
use crate::error::{GepError, Result};
use crate::linalg::{dense_gep_subspace, qr_thin, OrthoBasis, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::I => "I",
            Model::II => "II",
            Model::III => "III",
            Model::IV => "IV",
            Model::V => "V",
        })
    }
}

impl FromStr for Model {
    type Err = GepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Model::I),
            "II" | "2" => Ok(Model::II),
            "III" | "3" => Ok(Model::III),
            "IV" | "4" => Ok(Model::IV),
            "V" | "5" => Ok(Model::V),
            _ => Err(GepError::InvalidInput(format!("unknown model {s:?}"))),
        }
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Multivariate normal sampler through the Cholesky factor of the covariance.
#[derive(Clone, Debug)]
pub struct Mvn {
    mean: DVector<f64>,
    lower: DMatrix<f64>,
}

impl Mvn {
    pub fn new(mean: DVector<f64>, cov: &SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(GepError::ShapeMismatch(format!(
                "mean has length {} but covariance is {1}x{1}",
                mean.len(),
                cov.dim()
            )));
        }
        let chol = cov.as_matrix().clone().cholesky().ok_or_else(|| {
            GepError::NotPositiveDefinite("covariance has no Cholesky factor".into())
        })?;
        Ok(Mvn {
            mean,
            lower: chol.l(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `n` draws as the rows of an `n×p` matrix.
    pub fn sample_rows<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.dim();
        let z = DMatrix::from_fn(n, p, |_, _| standard_normal(rng));
        let mut x = z * self.lower.transpose();
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        x
    }
}

/// Rows carrying signal in the PCA models.
fn pca_signal_rows(model: Model, d: usize) -> usize {
    match model {
        Model::I => 10,
        _ => 5 * d,
    }
}

/// How the spike sizes `3·(5, 4, …, 5 − d + 1)` enter `Σ = U Λ Uᵀ + I`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeScale {
    /// `diag(Λ) = 3·(5, 4, …)`. Reproduces the published d = 3 distances.
    #[default]
    Eigenvalues,
    /// `diag(Λ^{1/2}) = 3·(5, 4, …)`, a much stronger signal.
    SqrtEigenvalues,
}

impl FromStr for SpikeScale {
    type Err = GepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eigenvalues" | "lambda" => Ok(SpikeScale::Eigenvalues),
            "sqrt_eigenvalues" | "sqrt" | "sqrt_lambda" => Ok(SpikeScale::SqrtEigenvalues),
            _ => Err(GepError::InvalidInput(format!(
                "unknown spike scale {s:?}; expected eigenvalues or sqrt_eigenvalues"
            ))),
        }
    }
}

impl SpikeScale {
    /// The `d` spike eigenvalues.
    pub fn eigenvalues(self, d: usize) -> Vec<f64> {
        (0..d)
            .map(|j| {
                let s = 3.0 * (5 - j) as f64;
                match self {
                    SpikeScale::Eigenvalues => s,
                    SpikeScale::SqrtEigenvalues => s * s,
                }
            })
            .collect()
    }
}

/// Population of a spiked-covariance PCA model `Σ = U Λ Uᵀ + I`.
#[derive(Clone, Debug)]
pub struct PcaTruth {
    /// Eigenvector matrix as specified by the model (columns may be
    /// non-orthogonal for Model I).
    pub u: DMatrix<f64>,
    /// Orthonormal basis of `span(u)`.
    pub basis: OrthoBasis,
    pub sigma: SymMatrix,
    /// Indices of nonzero rows of `u`.
    pub support: Vec<usize>,
    sampler: Mvn,
}

impl PcaTruth {
    /// Model I: the first 10 entries of each column are an independent
    /// uniform direction. Model II: disjoint blocks of 5 equal entries.
    /// Model III: the QR factor of a lower-triangular block pattern.
    pub fn new<R: Rng + ?Sized>(model: Model, d: usize, p: usize, rng: &mut R) -> Result<Self> {
        Self::with_spike(model, d, p, SpikeScale::default(), rng)
    }

    pub fn with_spike<R: Rng + ?Sized>(
        model: Model,
        d: usize,
        p: usize,
        spike: SpikeScale,
        rng: &mut R,
    ) -> Result<Self> {
        if model > Model::III {
            return Err(GepError::InvalidInput(format!(
                "PCA models are I, II and III, got {model}"
            )));
        }
        if d == 0 || d > 5 {
            return Err(GepError::InvalidInput(format!(
                "PCA models need 1 <= d <= 5, got {d}"
            )));
        }
        let rows = pca_signal_rows(model, d);
        if p <= rows {
            return Err(GepError::InvalidInput(format!(
                "Model {model} with d = {d} needs p > {rows}, got {p}"
            )));
        }
        let mut u = DMatrix::zeros(p, d);
        match model {
            Model::I => {
                for j in 0..d {
                    let z = DVector::from_fn(rows, |_, _| standard_normal(rng));
                    let z = &z / z.norm();
                    u.view_mut((0, j), (rows, 1)).copy_from(&z);
                }
            }
            Model::II => {
                let v = 1.0 / 5f64.sqrt();
                for j in 0..d {
                    for i in 0..5 {
                        u[(5 * j + i, j)] = v;
                    }
                }
            }
            _ => {
                let block = DMatrix::from_fn(rows, d, |i, j| if i / 5 >= j { 1.0 } else { 0.0 });
                let (q, _) = qr_thin(&block)?;
                u.view_mut((0, 0), (rows, d)).copy_from(q.as_matrix());
            }
        }
        let scaled = &u * DMatrix::from_diagonal(&DVector::from_vec(spike.eigenvalues(d)));
        let sigma = SymMatrix::new(scaled * u.transpose() + DMatrix::identity(p, p))?;
        let basis = crate::linalg::orthonormalize(&u)?;
        let support = (0..p).filter(|&i| u.row(i).amax() > 0.0).collect();
        let sampler = Mvn::new(DVector::zeros(p), &sigma)?;
        Ok(PcaTruth {
            u,
            basis,
            sigma,
            support,
            sampler,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        self.sampler.sample_rows(n, rng)
    }
}

/// `n` observations from a PCA model with a fresh truth, and the orthonormal
/// basis of the true eigenspace.
pub fn gen_pca<R: Rng + ?Sized>(
    model: Model,
    d: usize,
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let truth = PcaTruth::new(model, d, p, rng)?;
    let x = truth.sample(n, rng);
    Ok((x, truth.basis.into_inner()))
}

/// Compound symmetry `(1 − ρ)I + ρ11ᵀ`.
pub fn compound_symmetry(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
}

/// AR(1) correlation `ρ^{|i − j|}`.
pub fn ar1(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

const V_VECTORS: [[f64; 5]; 3] = [
    [2.0, 1.0, 2.0, 1.0, 2.0],
    [1.0, -1.0, 1.0, -1.0, 1.0],
    [0.0, 1.0, -1.0, 1.0, 0.0],
];

const W_VECTORS: [[f64; 5]; 3] = [
    [-1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0, 1.0, 0.0],
];

/// True discriminant subspace dimension of every LDA model.
pub const LDA_TRUE_DIM: usize = 2;

/// Population of a multiclass Gaussian LDA model.
#[derive(Clone, Debug)]
pub struct LdaPopulation {
    /// `p×K` class means.
    pub means: DMatrix<f64>,
    pub sigma: SymMatrix,
    /// Orthonormal basis of the population discriminant subspace.
    pub truth: OrthoBasis,
    pub support: Vec<usize>,
    samplers: Vec<Mvn>,
}

impl LdaPopulation {
    pub fn new(model: Model, p: usize) -> Result<Self> {
        if p < 6 {
            return Err(GepError::InvalidInput(format!(
                "LDA models need p >= 6, got {p}"
            )));
        }
        let pad = |cols: &[[f64; 5]]| {
            DMatrix::from_fn(p, cols.len(), |i, j| if i < 5 { cols[j][i] } else { 0.0 })
        };
        let (base, sigma) = match model {
            Model::I => (pad(&V_VECTORS), DMatrix::identity(p, p)),
            Model::II => (pad(&V_VECTORS), compound_symmetry(p, 0.5)),
            Model::III => (pad(&V_VECTORS), ar1(p, 0.5)),
            Model::IV => (pad(&W_VECTORS), compound_symmetry(p, 0.5)),
            Model::V => {
                let w = pad(&W_VECTORS);
                let mut wt = DMatrix::zeros(p, 4);
                wt.view_mut((0, 0), (p, 3)).copy_from(&w);
                wt.set_column(3, &(w.column_sum() / 3.0));
                (wt * 2.0, compound_symmetry(p, 0.5))
            }
        };
        let means = if model == Model::I {
            base
        } else {
            &sigma * base
        };
        let sigma = SymMatrix::new(sigma)?;

        let k = means.ncols();
        let mbar = means.column_mean();
        let mut a = DMatrix::zeros(p, p);
        for c in means.column_iter() {
            let diff = c - &mbar;
            a.ger(1.0 / k as f64, &diff, &diff, 1.0);
        }
        let truth = dense_gep_subspace(&SymMatrix::new(a)?, &sigma, LDA_TRUE_DIM)?;
        let support = (0..5).collect();
        let samplers = means
            .column_iter()
            .map(|m| Mvn::new(m.into_owned(), &sigma))
            .collect::<Result<_>>()?;
        Ok(LdaPopulation {
            means,
            sigma,
            truth,
            support,
            samplers,
        })
    }

    pub fn classes(&self) -> usize {
        self.means.ncols()
    }

    /// `n_per_class` draws from each class, labels `0..K`, classes in order.
    pub fn sample<R: Rng + ?Sized>(&self, n_per_class: usize, rng: &mut R) -> Result<LabeledData> {
        let k = self.classes();
        let p = self.means.nrows();
        let mut x = DMatrix::zeros(n_per_class * k, p);
        let mut labels = Vec::with_capacity(n_per_class * k);
        for (c, sampler) in self.samplers.iter().enumerate() {
            let block = sampler.sample_rows(n_per_class, rng);
            x.view_mut((c * n_per_class, 0), (n_per_class, p))
                .copy_from(&block);
            labels.extend(std::iter::repeat_n(c, n_per_class));
        }
        LabeledData::classes(x, labels)
    }
}

/// `n_per_class` draws per class from a fresh population, with the true basis.
pub fn gen_lda<R: Rng + ?Sized>(
    model: Model,
    p: usize,
    n_per_class: usize,
    rng: &mut R,
) -> Result<(LabeledData, DMatrix<f64>)> {
    let pop = LdaPopulation::new(model, p)?;
    let data = pop.sample(n_per_class, rng)?;
    Ok((data, pop.truth.into_inner()))
}

fn inside(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> bool {
    (x - cx).powi(2) + (y - cy).powi(2) <= r * r
}

/// Region membership in the yin-yang symbol on the disk of radius 2: the left
/// half, plus the upper inner disk, minus the lower inner disk, with the two
/// eyes of radius 1/4 at `(0, ±1)` swapped.
pub fn taichi_label(x1: f64, x2: f64) -> usize {
    let left = x1 < 0.0;
    let upper = inside(x1, x2, 0.0, 1.0, 1.0);
    let lower = inside(x1, x2, 0.0, -1.0, 1.0);
    let mut yin = (left || upper) && !lower;
    if inside(x1, x2, 0.0, 1.0, 0.25) || inside(x1, x2, 0.0, -1.0, 0.25) {
        yin = !yin;
    }
    usize::from(yin)
}

/// Tai-Chi data: `(x₁, x₂)` uniform on the disk of radius 2, the remaining
/// coordinates standard normal, label 1 on the yin region.
pub fn gen_taichi<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<LabeledData> {
    if p < 2 {
        return Err(GepError::InvalidInput(format!(
            "Tai-Chi data need p >= 2, got {p}"
        )));
    }
    let mut x = DMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let r = 2.0 * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let (x1, x2) = (r * theta.cos(), r * theta.sin());
        x[(i, 0)] = x1;
        x[(i, 1)] = x2;
        for j in 2..p {
            x[(i, j)] = standard_normal(rng);
        }
        labels.push(taichi_label(x1, x2));
    }
    LabeledData::classes(x, labels)
}
