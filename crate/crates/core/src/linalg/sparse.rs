//! Non-negative sparse matrices.
//!
//! Coordinate form at the interface, row-compressed storage inside. The
//! transpose is compressed as well so that `Aᵀ·B` is a row gather rather than
//! a scatter; every output row is then accumulated in a fixed order regardless
//! of how many threads are used.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many output values the kernels run on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Build from (row, col, value) triplets already sorted by (row, col) with
    /// no duplicates.
    fn from_sorted(rows: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut indptr = vec![0usize; rows + 1];
        for &(i, _, _) in triplets {
            indptr[i + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            indptr,
            indices: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        }
    }
}

/// A finite, non-negative sparse matrix with unique coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    csr: Csr,
    csr_t: Csr,
}

impl SparseMatrix {
    /// Builds a matrix from coordinate triplets. Duplicate coordinates are
    /// summed; explicit zeros are dropped.
    pub fn from_triplets<I>(rows: usize, cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in entries {
            if i >= rows || j >= cols {
                return Err(Error::OutOfBounds {
                    op: "sparse matrix",
                    row: i,
                    col: j,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    op: "sparse matrix",
                    row: i,
                    col: j,
                    value: v,
                });
            }
            *acc.entry((i, j)).or_insert(0.0) += v;
        }
        let mut triplets: Vec<(usize, usize, f64)> = acc
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((i, j), v)| (i, j, v))
            .collect();
        let csr = Csr::from_sorted(rows, &triplets);
        triplets.iter_mut().for_each(|t| std::mem::swap(&mut t.0, &mut t.1));
        triplets.sort_by_key(|t| (t.0, t.1));
        let csr_t = Csr::from_sorted(cols, &triplets);
        Ok(SparseMatrix {
            rows,
            cols,
            csr,
            csr_t,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, std::iter::empty()).expect("empty matrix is valid")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).expect("identity is valid")
    }

    /// Sparsifies a dense non-negative matrix, keeping non-zero entries.
    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Result<Self> {
        let (rows, cols) = dense.dim();
        Self::from_triplets(
            rows,
            cols,
            dense
                .indexed_iter()
                .filter(|(_, &v)| v != 0.0)
                .map(|((i, j), &v)| (i, j, v)),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.csr.values.len()
    }

    /// Entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.csr.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.csr.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr
            .row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            csr: self.csr_t.clone(),
            csr_t: self.csr.clone(),
        }
    }

    pub fn frob_sq(&self) -> f64 {
        self.csr.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (i, j, v) in self.iter() {
            out[[i, j]] = v;
        }
        out
    }

    /// Sum of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.csr.row(i).map(|(_, v)| v).sum()).collect()
    }
}

fn gather(csr: &Csr, out_rows: usize, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let k = b.ncols();
    let mut out = Array2::<f64>::zeros((out_rows, k));
    if k == 0 {
        return out;
    }
    let fill = |i: usize, row: &mut [f64]| {
        for (j, v) in csr.row(i) {
            let brow = b.row(j);
            for (o, &x) in row.iter_mut().zip(brow.iter()) {
                *o += v * x;
            }
        }
    };
    let data = out
        .as_slice_mut()
        .expect("freshly allocated arrays are contiguous");
    if out_rows * k >= PAR_THRESHOLD {
        data.par_chunks_mut(k)
            .enumerate()
            .for_each(|(i, row)| fill(i, row));
    } else {
        data.chunks_mut(k).enumerate().for_each(|(i, row)| fill(i, row));
    }
    out
}

/// `A·B` for sparse `A` (n×m) and dense `B` (m×k).
pub fn spmm(a: &SparseMatrix, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.cols != b.nrows() {
        return Err(Error::DimensionMismatch {
            op: "spmm",
            left: a.shape(),
            right: b.dim(),
        });
    }
    Ok(gather(&a.csr, a.rows, b.view()))
}

/// `Aᵀ·B` for sparse `A` (n×m) and dense `B` (n×k), without forming `Aᵀ`.
pub fn spmm_t(a: &SparseMatrix, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.rows != b.nrows() {
        return Err(Error::DimensionMismatch {
            op: "spmm_t",
            left: a.shape(),
            right: b.dim(),
        });
    }
    Ok(gather(&a.csr_t, a.cols, b.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 1.0), (1, 1, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 2.0);
    }

    #[test]
    fn rejects_negative_and_out_of_bounds() {
        assert!(matches!(
            SparseMatrix::from_triplets(2, 2, [(0, 1, -1.0)]),
            Err(Error::InvalidEntry { .. })
        ));
        assert!(matches!(
            SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(SparseMatrix::from_triplets(1, 1, [(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn identity_spmm() {
        let b = array![[3.0, 4.0], [5.0, 6.0]];
        assert_eq!(spmm(&SparseMatrix::identity(2), &b).unwrap(), b);
        assert_eq!(spmm_t(&SparseMatrix::identity(2), &b).unwrap(), b);
        assert_eq!(spmm(&SparseMatrix::zeros(2, 2), &b).unwrap(), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn spmm_t_single_entry() {
        let a = SparseMatrix::from_triplets(1, 2, [(0, 1, 2.0)]).unwrap();
        let b = array![[3.0, 5.0]];
        assert_eq!(spmm_t(&a, &b).unwrap(), array![[0.0, 0.0], [6.0, 10.0]]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let a = SparseMatrix::zeros(2, 3);
        let err = spmm(&a, &Array2::zeros((2, 1))).unwrap_err();
        assert!(err.to_string().contains("(2, 3)") && err.to_string().contains("(2, 1)"));
        assert!(spmm_t(&a, &Array2::zeros((3, 1))).is_err());
    }

    #[test]
    fn transpose_swaps_storage() {
        let a = SparseMatrix::from_triplets(2, 3, [(0, 2, 1.5), (1, 0, 2.0)]).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.get(2, 0), 1.5);
        assert_eq!(t.to_dense(), a.to_dense().t());
    }
}
