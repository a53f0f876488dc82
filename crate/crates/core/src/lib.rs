//! Batch and sequential logistic PCA for multivariate binary streams.
//!
//! The batch fit ([`batch`]) alternates exact Newton solves over score rows and
//! loading rows. The sequential engine ([`stream`]) solves one score row per
//! arrival and takes a single gradient step on the loadings. [`diagnostics`]
//! evaluates both against each other and checks the convergence bounds at
//! run time.

pub mod batch;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod newton;
pub mod reconstruct;
pub mod simgen;
pub mod stream;

pub use error::{Error, Result};
pub use model::{
    signed_transform, BinaryMatrix, FactorModel, Hyperparams, ScheduleKind, SignedRow,
    StepSchedule,
};
