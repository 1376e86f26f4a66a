//! Sparse estimation of the leading eigenspace of a symmetric-definite
//! generalized eigenproblem `A u = λ B u` by penalized orthogonal iteration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod error;
pub mod exec;
pub mod gep;
pub mod linalg;
pub mod penalty;
pub mod simulation;
pub mod tuning;

pub use error::{GepError, Result};
pub use exec::Execution;
pub use gep::{fast_poi, fit, poi, GepPair, Init, Method, OuterConfig, SubspaceEstimate};
pub use linalg::{projection_distance, OrthoBasis, SymMatrix};
pub use penalty::{InnerSolveConfig, PenaltyKind, PenaltySpec};
pub use tuning::{select_lambda, CvReport, TuneConfig};
