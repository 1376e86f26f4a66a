//! Synthetic models, the LDA classifier used for evaluation, and the
//! experiment runner.

pub mod classify;
pub mod experiment;
pub mod models;

pub use classify::{classify_lda, LdaPrediction};
pub use experiment::{
    run_experiment, ExperimentReport, ExperimentSpec, Family, RepetitionResult, Stat,
};
pub use models::{gen_lda, gen_pca, gen_taichi, LdaPopulation, Model, Mvn, PcaTruth, SpikeScale};
