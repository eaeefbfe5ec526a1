//! Matrix representations and the handful of kernels the update rules are
//! composed from.

mod dense;
mod laplacian;
mod sparse;

pub use dense::{
    frob_diff_sq, frob_residual_sq, gram, hadamard_sqrt_update, split_pos_neg, DenseMatrix,
    SignSplit,
};
pub use laplacian::{laplacian_parts, trace_quadratic, GraphLaplacian, SYMMETRY_TOL};
pub use sparse::{spmm, spmm_t, SparseMatrix};
