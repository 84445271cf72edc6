//! Pairwise affinity construction and refinement.

use log::warn;
use nalgebra::DMatrix;

use crate::embedding::{norm, EmbeddingSet};
use crate::error::{Error, Result};
use crate::propagation::PropagatedConstraints;

/// Multiplier applied to entries removed by row-wise thresholding.
pub const ROW_DAMPING: f64 = 0.01;

const SYMMETRY_TOL: f64 = 1e-9;

/// Symmetric `N x N` similarity matrix with entries in `[0, 1]` and a unit
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(DMatrix<f64>);

impl AffinityMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!("affinity matrix is {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        for i in 0..n {
            if a[(i, i)] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "affinity diagonal entry {i} is {} (expected 1)",
                    a[(i, i)]
                )));
            }
            for j in 0..n {
                let v = a[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("affinity entry ({i}, {j}) = {v} outside [0, 1]")));
                }
                if (v - a[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidArgument(format!("affinity matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(a))
    }

    /// Clamps into range, symmetrizes and resets the diagonal.
    fn sanitized(mut a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        for i in 0..n {
            for j in i + 1..n {
                let v = (0.5 * (a[(i, j)] + a[(j, i)])).clamp(0.0, 1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            a[(i, i)] = 1.0;
        }
        Self(a)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Shifted cosine similarity `(1 + cos) / 2`.
pub fn cosine_affinity(embeddings: &EmbeddingSet) -> Result<AffinityMatrix> {
    let n = embeddings.len();
    let norms: Vec<f64> = embeddings.vectors().map(norm).collect();
    if let Some(k) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNorm(k));
    }
    let records = embeddings.records();
    let mut a = DMatrix::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = records[i].vector.iter().zip(&records[j].vector).map(|(x, y)| x * y).sum();
            let cos = dot / (norms[i] * norms[j]);
            let v = (0.5 * (1.0 + cos)).clamp(0.0, 1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(AffinityMatrix(a))
}

/// Row-wise thresholding followed by symmetrization.
///
/// In each row the `ceil(row_keep_fraction * N)` largest entries survive;
/// anything strictly below the smallest survivor is multiplied by
/// [`ROW_DAMPING`]. The result is `(A' + A'^T) / 2` with a unit diagonal.
pub fn refine(a: &AffinityMatrix, row_keep_fraction: f64) -> Result<AffinityMatrix> {
    if !(row_keep_fraction > 0.0 && row_keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("row_keep_fraction {row_keep_fraction} outside (0, 1]")));
    }
    let n = a.n();
    if n == 0 {
        return Ok(a.clone());
    }
    let keep = ((row_keep_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut out = a.0.clone();
    let mut row = vec![0.0; n];
    for i in 0..n {
        row.iter_mut().enumerate().for_each(|(j, v)| *v = a.0[(i, j)]);
        row.sort_by(|x, y| y.total_cmp(x));
        let threshold = row[keep - 1];
        for j in 0..n {
            if out[(i, j)] < threshold {
                out[(i, j)] *= ROW_DAMPING;
            }
        }
    }
    Ok(AffinityMatrix::sanitized(out))
}

/// Constraint adjustment: non-negative propagated constraints pull an entry
/// towards 1, negative ones scale it towards 0.
pub fn apply_constraints(a: &AffinityMatrix, z_hat: &PropagatedConstraints) -> Result<AffinityMatrix> {
    let z = z_hat.as_matrix();
    let n = a.n();
    if z.nrows() != n || z.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "constraint matrix is {}x{}, affinity is {n}x{n}",
            z.nrows(),
            z.ncols()
        )));
    }
    let mut out = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let zij = z[(i, j)];
            if !(-1.0..=1.0).contains(&zij) {
                return Err(Error::InvalidArgument(format!(
                    "propagated constraint ({i}, {j}) = {zij} outside [-1, 1]"
                )));
            }
            let aij = a.0[(i, j)];
            out[(i, j)] = if zij == 0.0 {
                aij
            } else if zij > 0.0 {
                1.0 - (1.0 - zij) * (1.0 - aij)
            } else {
                (1.0 + zij) * aij
            };
        }
    }
    Ok(AffinityMatrix::sanitized(out))
}

/// Keeps each row's `k` largest off-diagonal entries (ties to the lower
/// column index), zeroes the rest and averages with the transpose.
pub fn knn_sparsify(a: &AffinityMatrix, k: usize) -> Result<AffinityMatrix> {
    let n = a.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("knn k = {k} must satisfy 1 <= k < N = {n}")));
    }
    let mut kept = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&x, &y| a.0[(i, y)].total_cmp(&a.0[(i, x)]).then(x.cmp(&y)));
        for &j in &order[..k] {
            kept[(i, j)] = a.0[(i, j)];
        }
    }
    let mut out = (&kept + kept.transpose()) * 0.5;
    out.fill_diagonal(1.0);
    Ok(AffinityMatrix(out))
}

/// Default neighbour count: `max(4, ceil(N / 10))`, capped at `N - 1`.
pub fn default_knn_k(n: usize) -> usize {
    n.div_ceil(10).max(4).min(n.saturating_sub(1)).max(1)
}

/// `D^{-1/2} A D^{-1/2}` where `D` holds the row sums of `A`.
pub fn normalized_laplacian(a: &AffinityMatrix) -> Result<DMatrix<f64>> {
    let d = a.0.column_sum();
    if let Some(row) = d.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroRowSum(row));
    }
    Ok(scale_by_inv_sqrt_degree(&a.0, &d))
}

/// Like [`normalized_laplacian`] but isolated nodes get a zero row and column
/// instead of an error.
pub(crate) fn normalized_laplacian_isolating(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.column_sum();
    let isolated = d.iter().filter(|&&s| s <= 0.0).count();
    if isolated > 0 {
        warn!("{isolated} isolated node(s) in affinity graph; zeroing their Laplacian rows");
    }
    scale_by_inv_sqrt_degree(a, &d)
}

fn scale_by_inv_sqrt_degree(a: &DMatrix<f64>, d: &nalgebra::DVector<f64>) -> DMatrix<f64> {
    let inv: Vec<f64> = d.iter().map(|&s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 }).collect();
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| inv[i] * a[(i, j)] * inv[j])
}
