//! Dense kernels shared by the update rules.

use ndarray::{Array2, Zip};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Dense factor matrices are plain row-major `ndarray` arrays.
pub type DenseMatrix = Array2<f64>;

/// Positive and negative parts of a signed matrix, `plus - minus == source`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSplit {
    pub plus: DenseMatrix,
    pub minus: DenseMatrix,
}

/// `Bᵀ·B`, mirrored from the upper triangle so the result is exactly symmetric.
pub fn gram(b: &DenseMatrix) -> DenseMatrix {
    let k = b.ncols();
    let mut out = Array2::zeros((k, k));
    for p in 0..k {
        for q in p..k {
            let v = b.column(p).dot(&b.column(q));
            out[[p, q]] = v;
            out[[q, p]] = v;
        }
    }
    out
}

pub fn split_pos_neg(m: &DenseMatrix) -> SignSplit {
    SignSplit {
        plus: m.mapv(|v| if v > 0.0 { v } else { 0.0 }),
        minus: m.mapv(|v| if v < 0.0 { -v } else { 0.0 }),
    }
}

fn check_same_shape(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            op,
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

fn check_non_negative(op: &'static str, m: &DenseMatrix) -> Result<()> {
    match m.indexed_iter().find(|(_, &v)| !(v >= 0.0 && v.is_finite())) {
        Some(((row, col), &value)) => Err(Error::InvalidEntry {
            op,
            row,
            col,
            value,
        }),
        None => Ok(()),
    }
}

/// The multiplicative step `S ∘ √(numer / (denom + eps))`.
///
/// Numerators and denominators of every rule are non-negative by construction,
/// so a negative entry here is reported as an error instead of being clipped.
pub fn hadamard_sqrt_update(
    s: &DenseMatrix,
    numer: &DenseMatrix,
    denom: &DenseMatrix,
    eps: f64,
) -> Result<DenseMatrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("denominator guard must be > 0, got {eps}")));
    }
    check_same_shape("hadamard_sqrt_update", s, numer)?;
    check_same_shape("hadamard_sqrt_update", s, denom)?;
    check_non_negative("hadamard_sqrt_update: factor", s)?;
    check_non_negative("hadamard_sqrt_update: numerator", numer)?;
    check_non_negative("hadamard_sqrt_update: denominator", denom)?;
    let mut out = s.clone();
    Zip::from(&mut out)
        .and(numer)
        .and(denom)
        .for_each(|o, &n, &d| *o *= (n / (d + eps)).sqrt());
    Ok(out)
}

/// `‖X − A·H·Bᵀ‖²_F` (or `‖X − A·Bᵀ‖²_F` when `h` is `None`).
///
/// Expanded as `‖X‖² − 2·Σ_nnz X_ij (AH)_i·B_j + Σ((AH)ᵀ(AH) ∘ BᵀB)` so the
/// dense product is never formed. Clamped at zero.
pub fn frob_residual_sq(
    x: &SparseMatrix,
    a: &DenseMatrix,
    h: Option<&DenseMatrix>,
    b: &DenseMatrix,
) -> Result<f64> {
    let ah = match h {
        Some(h) => {
            if a.ncols() != h.nrows() || h.ncols() != b.ncols() {
                return Err(Error::DimensionMismatch {
                    op: "frob_residual_sq: A·H·Bᵀ",
                    left: a.dim(),
                    right: h.dim(),
                });
            }
            a.dot(h)
        }
        None => {
            if a.ncols() != b.ncols() {
                return Err(Error::DimensionMismatch {
                    op: "frob_residual_sq: A·Bᵀ",
                    left: a.dim(),
                    right: b.dim(),
                });
            }
            a.clone()
        }
    };
    if x.shape() != (a.nrows(), b.nrows()) {
        return Err(Error::DimensionMismatch {
            op: "frob_residual_sq: X vs A·Bᵀ",
            left: x.shape(),
            right: (a.nrows(), b.nrows()),
        });
    }
    let cross: f64 = x
        .iter()
        .map(|(i, j, v)| v * ah.row(i).dot(&b.row(j)))
        .sum();
    let quad = (&gram(&ah) * &gram(b)).sum();
    Ok((x.frob_sq() - 2.0 * cross + quad).max(0.0))
}

/// `‖A − B‖²_F` for dense matrices of equal shape.
pub fn frob_diff_sq(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    check_same_shape("frob_diff_sq", a, b)?;
    Ok(Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y)))
}
