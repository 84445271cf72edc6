//! Semi-supervised dimension reduction: a linear projection that keeps the
//! spread of the data while honouring must-link and cannot-link pairs.
//!
//! The projection maximizes `tr(W^T E L E^T W)` over orthonormal `W`, where
//! `E` holds the centred embeddings as columns and `L = diag(S 1) - S` is the
//! Laplacian of a pairwise weight matrix `S`. With no constraints `S` is
//! uniform and the solution is the PCA subspace.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

/// How the constraint terms enter the weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsdrWeighting {
    /// Must-link pairs get `1/N^2 + alpha/|M|`, cannot-link pairs
    /// `1/N^2 - beta/|C|`.
    MustLinkPositive,
    /// Must-link pairs get `1/N^2 - alpha/|M|`, cannot-link pairs
    /// `1/N^2 + beta/|C|`. Maximizing the objective then pulls must-linked
    /// embeddings together and pushes cannot-linked ones apart.
    #[default]
    CannotLinkPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsdrConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Target dimension; `None` means `min(D, 32)`.
    pub out_dim: Option<usize>,
    pub weighting: SsdrWeighting,
}

impl Default for SsdrConfig {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, out_dim: None, weighting: SsdrWeighting::default() }
    }
}

impl SsdrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ssdr weights must be non-negative (alpha {}, beta {})",
                self.alpha, self.beta
            )));
        }
        if self.out_dim == Some(0) {
            return Err(Error::InvalidArgument("ssdr out_dim must be at least 1".into()));
        }
        Ok(())
    }

    pub fn out_dim_for(&self, dim: usize) -> Result<usize> {
        match self.out_dim {
            Some(d) if d > dim => {
                Err(Error::InvalidArgument(format!("ssdr out_dim {d} exceeds embedding dimension {dim}")))
            }
            Some(d) => Ok(d),
            None => Ok(dim.min(32)),
        }
    }
}

/// `D x d` projection with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix(DMatrix<f64>);

impl ProjectionMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn out_dim(&self) -> usize {
        self.0.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct SsdrProjection {
    pub projection: ProjectionMatrix,
    /// Eigenvalues paired with the columns of `projection`, descending.
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
    pub embeddings: EmbeddingSet,
}

pub fn ssdr_weight_matrix(cs: &ConstraintSet, n: usize, cfg: &SsdrConfig) -> Result<DMatrix<f64>> {
    cs.check_bounds(n)?;
    let base = 1.0 / (n * n) as f64;
    let mut s = DMatrix::from_element(n, n, base);
    let (must_sign, cannot_sign) = match cfg.weighting {
        SsdrWeighting::MustLinkPositive => (1.0, -1.0),
        SsdrWeighting::CannotLinkPositive => (-1.0, 1.0),
    };
    if !cs.must().is_empty() {
        let w = base + must_sign * cfg.alpha / cs.must().len() as f64;
        for &(i, j) in cs.must() {
            s[(i, j)] = w;
            s[(j, i)] = w;
        }
    }
    if !cs.cannot().is_empty() {
        let w = base + cannot_sign * cfg.beta / cs.cannot().len() as f64;
        for &(i, j) in cs.cannot() {
            s[(i, j)] = w;
            s[(j, i)] = w;
        }
    }
    Ok(s)
}

/// Column means of the embeddings and the centred `N x D` data.
fn centred(embeddings: &EmbeddingSet) -> (Vec<f64>, DMatrix<f64>) {
    let mut x = embeddings.to_matrix();
    let n = x.nrows().max(1) as f64;
    let mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
    for (j, m) in mean.iter().enumerate() {
        x.column_mut(j).add_scalar_mut(-m);
    }
    (mean, x)
}

/// The symmetrized `D x D` matrix `E L E^T` on centred embeddings.
pub fn ssdr_scatter(embeddings: &EmbeddingSet, cs: &ConstraintSet, cfg: &SsdrConfig) -> Result<DMatrix<f64>> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ssdr needs at least 2 embeddings, got {n}")));
    }
    let s = ssdr_weight_matrix(cs, n, cfg)?;
    let mut laplacian = -s;
    for i in 0..n {
        let row_sum: f64 = -laplacian.row(i).sum();
        laplacian[(i, i)] += row_sum;
    }
    let (_, x) = centred(embeddings);
    let m = x.transpose() * laplacian * &x;
    Ok((&m + m.transpose()) * 0.5)
}

/// `tr(W^T M W)`.
pub fn objective(w: &DMatrix<f64>, scatter: &DMatrix<f64>) -> f64 {
    (w.transpose() * scatter * w).trace()
}

/// Projects the embeddings onto the top eigenvectors of [`ssdr_scatter`]
/// and rescales the projected vectors to unit length.
pub fn ssdr_project(embeddings: &EmbeddingSet, cs: &ConstraintSet, cfg: &SsdrConfig) -> Result<SsdrProjection> {
    cfg.validate()?;
    let mut d = cfg.out_dim_for(embeddings.dim())?;
    let scatter = ssdr_scatter(embeddings, cs, cfg)?;
    let eig = SymmetricEigen::new(scatter);

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let scale = eig.eigenvalues.amax();
    let rank = eig.eigenvalues.iter().filter(|v| v.abs() > 1e-10 * scale).count().max(1);
    if d > rank {
        warn!("ssdr out_dim {d} exceeds rank {rank} of the scatter matrix; using {rank}");
        d = rank;
    }

    let dim = embeddings.dim();
    let mut w = DMatrix::zeros(dim, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (col, &k) in order.iter().take(d).enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        w.set_column(col, &v);
        eigenvalues.push(eig.eigenvalues[k]);
    }

    let (mean, x) = centred(embeddings);
    let projected = x * &w;
    let vectors = projected
        .row_iter()
        .enumerate()
        .map(|(k, row)| {
            let norm = row.norm();
            if norm == 0.0 {
                return Err(Error::ZeroNorm(k));
            }
            Ok(row.iter().map(|v| v / norm).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    Ok(SsdrProjection {
        projection: ProjectionMatrix(w),
        eigenvalues,
        mean,
        embeddings: embeddings.with_vectors(vectors)?,
    })
}
