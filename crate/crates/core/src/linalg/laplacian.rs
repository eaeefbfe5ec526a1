//! Degree/adjacency split of the user-user graph, `L = D − G`.

use ndarray::Array2;

use super::dense::DenseMatrix;
use super::sparse::{spmm, SparseMatrix};
use crate::error::{Error, Result};

/// Asymmetry tolerated (and averaged away) in the user graph.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    /// Diagonal of `D`, the weighted degree of every node.
    pub degree: Vec<f64>,
    /// Symmetric adjacency `G` without self-loops.
    pub adjacency: SparseMatrix,
}

impl GraphLaplacian {
    pub fn empty(m: usize) -> Self {
        GraphLaplacian {
            degree: vec![0.0; m],
            adjacency: SparseMatrix::zeros(m, m),
        }
    }

    pub fn size(&self) -> usize {
        self.degree.len()
    }

    /// `G·S`
    pub fn adjacency_times(&self, s: &DenseMatrix) -> Result<DenseMatrix> {
        spmm(&self.adjacency, s)
    }

    /// `D·S`
    pub fn degree_times(&self, s: &DenseMatrix) -> Result<DenseMatrix> {
        if s.nrows() != self.size() {
            return Err(Error::DimensionMismatch {
                op: "degree_times",
                left: (self.size(), self.size()),
                right: s.dim(),
            });
        }
        let mut out = s.clone();
        for (mut row, &d) in out.rows_mut().into_iter().zip(&self.degree) {
            row *= d;
        }
        Ok(out)
    }

    /// Dense `L = D − G`, for diagnostics and small tests.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut l = -self.adjacency.to_dense();
        for (i, &d) in self.degree.iter().enumerate() {
            l[[i, i]] += d;
        }
        l
    }
}

/// Validates and splits a user graph into its degree diagonal and adjacency.
///
/// Self-loops are dropped with a warning. Asymmetry up to [`SYMMETRY_TOL`] is
/// removed by averaging `(G + Gᵀ)/2`; anything larger is an input error.
pub fn laplacian_parts(g: &SparseMatrix) -> Result<GraphLaplacian> {
    let (rows, cols) = g.shape();
    if rows != cols {
        return Err(Error::DimensionMismatch {
            op: "laplacian_parts: graph must be square",
            left: g.shape(),
            right: (cols, rows),
        });
    }
    let mut loops = 0usize;
    let mut worst: Option<(usize, usize, f64)> = None;
    let mut entries = Vec::with_capacity(2 * g.nnz());
    for (i, j, v) in g.iter() {
        if i == j {
            loops += 1;
            continue;
        }
        let diff = (v - g.get(j, i)).abs();
        if worst.is_none_or(|w| diff > w.2) {
            worst = Some((i, j, diff));
        }
        entries.push((i, j, 0.5 * v));
        entries.push((j, i, 0.5 * v));
    }
    if loops > 0 {
        log::warn!("user graph: dropped {loops} self-loop(s)");
    }
    if let Some((i, j, diff)) = worst {
        if diff > SYMMETRY_TOL {
            return Err(Error::Asymmetric {
                i,
                j,
                diff,
                tol: SYMMETRY_TOL,
            });
        }
    }
    let adjacency = SparseMatrix::from_triplets(rows, cols, entries)?;
    let degree = adjacency.row_sums();
    Ok(GraphLaplacian { degree, adjacency })
}

/// `tr(Sᵀ(D − G)S)`, clamped at zero.
pub fn trace_quadratic(s: &DenseMatrix, lap: &GraphLaplacian) -> Result<f64> {
    if s.nrows() != lap.size() {
        return Err(Error::DimensionMismatch {
            op: "trace_quadratic",
            left: (lap.size(), lap.size()),
            right: s.dim(),
        });
    }
    let degree_part: f64 = s
        .rows()
        .into_iter()
        .zip(&lap.degree)
        .map(|(row, &d)| d * row.dot(&row))
        .sum();
    let adjacency_part: f64 = lap
        .adjacency
        .iter()
        .map(|(i, j, w)| w * s.row(i).dot(&s.row(j)))
        .sum();
    Ok((degree_part - adjacency_part).max(0.0))
}
