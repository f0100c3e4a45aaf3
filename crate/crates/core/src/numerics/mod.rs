//! Dense matrix kernels, the matrix exponential and an unconstrained
//! quasi-Newton maximizer shared by both estimators.

mod expm;
mod matrix;
mod optimize;

pub use expm::{matrix_exponential, matrix_exponential_pade, two_state_exponential};
pub use matrix::SquareMatrix;
pub use optimize::{
    finite_diff_gradient, hessian_from_gradient, maximize, maximize_with, FnObjective, MaximizeOptions, Objective,
    OptimResult,
};
