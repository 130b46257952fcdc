//! Multiview Hessian-regularized semi-supervised learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: multiview feature matrices, label masks and synthetic generators.
//! - [`kernels`]: per-view Gram matrices and their simplex-weighted combination.
//! - [`manifold`]: k-NN graphs, graph Laplacians and local Hessian energy matrices.
//! - [`solvers`]: kernel least squares, Nesterov-smoothed hinge SVM, the θ/β
//!   weight subproblems and the alternating outer loop.
//! - [`eval`]: 11-point interpolated AP, mAP and the label-fraction sweep.
//!
//! Every learned function has the representer form `f(x) = Σ_i α_i Σ_k θ_k K_k(x_i, x)`
//! over the labeled and unlabeled training examples.

pub mod cache;
pub mod dataset;
mod error;
pub mod eval;
pub mod kernels;
pub mod linalg;
pub mod manifold;
pub mod simplex;
pub mod solvers;

pub use error::{Error, Result};
pub use simplex::{project_simplex, SimplexWeights};
