//! Constraint propagation: closed-form E²CP, a fixed-point oracle for it, and
//! the k-NN / augmentation enhanced variant (E²CPM).

use nalgebra::{Cholesky, DMatrix};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::affinity::{default_knn_k, knn_sparsify, normalized_laplacian_isolating, AffinityMatrix};
use crate::constraints::{to_constraint_matrix, ConstraintMatrix, ConstraintSet, Pair};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Iteration cap for [`e2cp_iterative_oracle`], per sweep direction.
pub const ORACLE_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    /// Diffusion strength, `0 < lambda < 1`.
    pub lambda: f64,
    /// Neighbour count for the sparsified graph; `None` picks
    /// `max(4, ceil(N / 10))`.
    pub knn_k: Option<usize>,
    /// Unconstrained pairs with affinity above this may become must-links.
    pub theta_m: f64,
    /// Unconstrained pairs with affinity below this may become cannot-links.
    pub theta_c: f64,
    /// Fraction of qualifying pairs promoted to constraints.
    pub augment_fraction: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { lambda: 0.5, knn_k: None, theta_m: 0.9, theta_c: 0.15, augment_fraction: 0.1, seed: 0 }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument(format!("lambda {} outside (0, 1)", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.augment_fraction) {
            return Err(Error::InvalidArgument(format!("augment_fraction {} outside [0, 1]", self.augment_fraction)));
        }
        if !(self.theta_c < self.theta_m) {
            return Err(Error::InvalidArgument(format!(
                "theta_c {} must be below theta_m {}",
                self.theta_c, self.theta_m
            )));
        }
        if self.knn_k == Some(0) {
            return Err(Error::InvalidArgument("knn_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn knn_k_for(&self, n: usize) -> usize {
        self.knn_k.unwrap_or_else(|| default_knn_k(n))
    }
}

/// Dense propagated constraint matrix, symmetric with entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedConstraints(DMatrix<f64>);

impl PropagatedConstraints {
    pub fn from_matrix(z: DMatrix<f64>) -> Result<Self> {
        if !z.is_square() {
            return Err(Error::InvalidArgument("propagated constraints must be square".into()));
        }
        let n = z.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = z[(i, j)];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "propagated constraint ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - z[(j, i)]).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("propagated constraints not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(z))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    fn clamped(z: DMatrix<f64>) -> Self {
        Self(z.map(|v| v.clamp(-1.0, 1.0)))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1)")));
    }
    Ok(())
}

fn check_sizes(z: &ConstraintMatrix, a: &AffinityMatrix) -> Result<()> {
    if z.n() != a.n() {
        return Err(Error::InvalidArgument(format!(
            "constraint matrix has size {}, affinity has size {}",
            z.n(),
            a.n()
        )));
    }
    Ok(())
}

/// `(1 - lambda)^2 (I - lambda L)^{-1} Z (I - lambda L)^{-1}` before clamping,
/// with `L = D^{-1/2} A D^{-1/2}`. Both products go through a Cholesky solve.
pub fn e2cp_unclamped(z: &ConstraintMatrix, a: &AffinityMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    check_sizes(z, a)?;
    let n = a.n();
    let l = normalized_laplacian_isolating(a.as_matrix());
    let system = DMatrix::identity(n, n) - l * lambda;
    let chol = Cholesky::new(system).ok_or(Error::NotPositiveDefinite)?;
    let left = chol.solve(z.as_matrix());
    let both = chol.solve(&left.transpose()).transpose();
    let mut out = both * (1.0 - lambda).powi(2);
    // solves leave round-off asymmetry
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Closed-form propagation, clamped to `[-1, 1]`.
pub fn e2cp(z: &ConstraintMatrix, a: &AffinityMatrix, lambda: f64) -> Result<PropagatedConstraints> {
    e2cp_unclamped(z, a, lambda).map(PropagatedConstraints::clamped)
}

/// Fixed-point iteration whose limit is the closed form of [`e2cp`]:
/// `F <- lambda L F + (1 - lambda) Z` down the columns, then
/// `G <- lambda G L + (1 - lambda) F` across the rows.
///
/// Returns the unclamped limit. Only intended as a test oracle.
pub fn e2cp_iterative_oracle(z: &ConstraintMatrix, a: &AffinityMatrix, lambda: f64, tol: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    check_sizes(z, a)?;
    let l = normalized_laplacian_isolating(a.as_matrix());
    let stop = tol * (1.0 - lambda);

    let source = z.as_matrix() * (1.0 - lambda);
    let mut vertical = source.clone();
    let mut converged = false;
    for _ in 0..ORACLE_MAX_ITERS {
        let next = &l * &vertical * lambda + &source;
        let delta = (&next - &vertical).amax();
        vertical = next;
        if delta <= stop {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(ORACLE_MAX_ITERS));
    }

    let source = vertical * (1.0 - lambda);
    let mut horizontal = source.clone();
    for _ in 0..ORACLE_MAX_ITERS {
        let next = &horizontal * &l * lambda + &source;
        let delta = (&next - &horizontal).amax();
        horizontal = next;
        if delta <= stop {
            return Ok(horizontal);
        }
    }
    Err(Error::NoConvergence(ORACLE_MAX_ITERS))
}

/// Adds randomly chosen high-confidence pairs to the constraints: among
/// unconstrained pairs, those with affinity strictly above `theta_m` become
/// must-link candidates and those strictly below `theta_c` cannot-link
/// candidates; `floor(augment_fraction * count)` of each are drawn.
pub fn augment_constraints(cs: &ConstraintSet, a: &AffinityMatrix, cfg: &PropagationConfig) -> Result<ConstraintSet> {
    let n = a.n();
    cs.check_bounds(n)?;
    if !(0.0..=1.0).contains(&cfg.augment_fraction) {
        return Err(Error::InvalidArgument(format!("augment_fraction {} outside [0, 1]", cfg.augment_fraction)));
    }
    let mut out = cs.clone();
    if cfg.augment_fraction == 0.0 {
        return Ok(out);
    }
    let mut must_pool: Vec<Pair> = Vec::new();
    let mut cannot_pool: Vec<Pair> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if cs.is_constrained(i, j) {
                continue;
            }
            let v = a.get(i, j);
            if v > cfg.theta_m {
                must_pool.push((i, j));
            } else if v < cfg.theta_c {
                cannot_pool.push((i, j));
            }
        }
    }
    let mut rng = rng_from_seed(cfg.seed);
    let take = |len: usize| (cfg.augment_fraction * len as f64).floor() as usize;
    for k in index::sample(&mut rng, must_pool.len(), take(must_pool.len())) {
        let (i, j) = must_pool[k];
        out.add_must(i, j)?;
    }
    for k in index::sample(&mut rng, cannot_pool.len(), take(cannot_pool.len())) {
        let (i, j) = cannot_pool[k];
        out.add_cannot(i, j)?;
    }
    Ok(out)
}

/// Augment, sparsify the graph to its k-NN form, then run [`e2cp`] on it.
pub fn e2cpm(cs: &ConstraintSet, a: &AffinityMatrix, cfg: &PropagationConfig) -> Result<PropagatedConstraints> {
    cfg.validate()?;
    let n = a.n();
    if n < 2 {
        cs.check_bounds(n)?;
        return Ok(PropagatedConstraints::zeros(n));
    }
    let augmented = augment_constraints(cs, a, cfg)?;
    let z = to_constraint_matrix(&augmented, n)?;
    let sparse = knn_sparsify(a, cfg.knn_k_for(n))?;
    e2cp(&z, &sparse, cfg.lambda)
}
