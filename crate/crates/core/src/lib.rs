//! Alternating least squares for CP and tensor-ring decompositions where each
//! least-squares solve is replaced by a leverage-score sampled problem.
//!
//! The sampling distribution is estimated with a recursive sketch of the
//! Khatri–Rao or subchain design matrix and drawn one subindex at a time, so
//! the per-iteration cost does not grow exponentially with the tensor order.
//!
//! Module layout:
//! - [`tensor`]: dense tensors, unfoldings, Kronecker/Khatri–Rao products, CP and TR models.
//! - [`sketch`]: hash families, CountSketch, TensorSketch and the recursive sketch.
//! - [`leverage`]: exact and estimated leverage scores, index sampling, sampled least squares.
//! - [`cp`]: CP-ALS and CP-ALS-ES.
//! - [`tr`]: TR-ALS and TR-ALS-ES.
//! - [`baselines`]: product-distribution samplers (CP-ARLS-LEV and TR-ALS-Sampled style).
//! - [`xbench`]: synthetic data, experiment runners and reports.

pub mod als;
pub mod baselines;
pub mod cp;
pub mod error;
pub mod leverage;
pub mod seed;
pub mod sketch;
pub mod tensor;
pub mod tr;
pub mod xbench;

pub use error::{Error, Result};
pub use tensor::{CpModel, DenseTensor, Matrix, TrModel};
