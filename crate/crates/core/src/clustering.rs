//! Normalized spectral clustering with eigengap speaker-count estimation.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::affinity::{normalized_laplacian, AffinityMatrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

const KMEANS_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub max_speakers: usize,
    /// Skip estimation and use this many clusters.
    pub fixed_k: Option<usize>,
    pub kmeans_restarts: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { max_speakers: 16, fixed_k: None, kmeans_restarts: 10, seed: 0 }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_speakers == 0 {
            return Err(Error::InvalidArgument("max_speakers must be at least 1".into()));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::InvalidArgument("kmeans_restarts must be at least 1".into()));
        }
        if self.fixed_k == Some(0) {
            return Err(Error::InvalidArgument("fixed_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiarizationResult {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Spectrum of the normalized affinity, descending.
    pub eigenvalues: Vec<f64>,
}

/// Eigen-decomposition of `D^{-1/2} A D^{-1/2}` sorted by descending
/// eigenvalue.
fn sorted_spectrum(a: &AffinityMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let l = normalized_laplacian(a)?;
    let eig = SymmetricEigen::new(l);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

/// Largest gap between consecutive eigenvalues among the first
/// `max_speakers + 1`; the earliest gap wins ties.
fn eigengap_k(eigenvalues: &[f64], max_speakers: usize) -> usize {
    let n = eigenvalues.len();
    if n < 2 {
        return 1;
    }
    let k_max = max_speakers.min(n - 1).max(1);
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for k in 1..=k_max {
        let gap = eigenvalues[k - 1] - eigenvalues[k];
        if gap > best_gap {
            best_gap = gap;
            best = k;
        }
    }
    best
}

pub fn estimate_num_speakers(a: &AffinityMatrix, max_speakers: usize) -> Result<usize> {
    if a.n() < 2 {
        return Ok(1);
    }
    let (values, _) = sorted_spectrum(a)?;
    Ok(eigengap_k(&values, max_speakers))
}

pub fn spectral_cluster(a: &AffinityMatrix, cfg: &ClusteringConfig) -> Result<DiarizationResult> {
    cfg.validate()?;
    let n = a.n();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot cluster an empty session".into()));
    }
    if let Some(k) = cfg.fixed_k {
        if k > n {
            return Err(Error::InvalidArgument(format!("requested {k} clusters for {n} embeddings")));
        }
    }
    if n == 1 {
        return Ok(DiarizationResult { labels: vec![0], k: 1, eigenvalues: vec![1.0] });
    }
    let (eigenvalues, vectors) = sorted_spectrum(a)?;
    let k = cfg.fixed_k.unwrap_or_else(|| eigengap_k(&eigenvalues, cfg.max_speakers));

    let mut points = vectors.columns(0, k).into_owned();
    for mut row in points.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let raw = kmeans(&points, k, cfg.kmeans_restarts, cfg.seed);
    let (labels, k) = canonical_labels(&raw);
    Ok(DiarizationResult { labels, k, eigenvalues })
}

/// Renumbers clusters by first appearance and drops unused ids.
pub fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroid: &[f64]) -> f64 {
    points.row(i).iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn kmeans_plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.nrows();
    let row = |i: usize| points.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centroids = vec![row(rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // all remaining points coincide with a centroid
            Err(_) => rng.random_range(0..n),
        };
        let c = row(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// One Lloyd run from a k-means++ start. Returns labels and inertia.
fn lloyd(points: &DMatrix<f64>, k: usize, rng: &mut Rng) -> (Vec<usize>, f64) {
    let (n, dim) = points.shape();
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(points, i, &centroids[a]).total_cmp(&sq_dist(points, i, &centroids[b])))
                .unwrap_or(0);
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(points.row(i).iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // reseed an empty cluster at the worst-served point
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(points, a, &centroids[labels[a]])
                            .total_cmp(&sq_dist(points, b, &centroids[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centroids[c] = points.row(far).iter().copied().collect();
            }
        }
    }
    let inertia = labels.iter().enumerate().map(|(i, &l)| sq_dist(points, i, &centroids[l])).sum();
    (labels, inertia)
}

/// k-means with `restarts` seeded k-means++ starts; keeps the lowest inertia,
/// earliest restart on ties.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let n = points.nrows();
    if k <= 1 || n <= 1 {
        return vec![0; n];
    }
    if k >= n {
        return (0..n).collect();
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(seed, &[r as u64]));
        let (labels, inertia) = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    best.map(|(l, _)| l).unwrap_or_else(|| vec![0; n])
}
