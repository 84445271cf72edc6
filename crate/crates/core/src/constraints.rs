//! Pairwise must-link / cannot-link constraints: construction from segment
//! annotations, simulation from reference labels, and the signed matrix form.

use std::collections::{BTreeSet, HashMap};

use log::warn;
use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Unordered index pair stored as `(low, high)`.
pub type Pair = (usize, usize);

/// Canonical form of an unordered pair; `None` for self-pairs.
pub fn canonical(i: usize, j: usize) -> Option<Pair> {
    match i.cmp(&j) {
        std::cmp::Ordering::Less => Some((i, j)),
        std::cmp::Ordering::Greater => Some((j, i)),
        std::cmp::Ordering::Equal => None,
    }
}

/// A text segment with the semantic speaker cues attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnnotation {
    pub segment_id: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub is_dialogue: bool,
    #[serde(default)]
    pub turn_change_points: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_label: Option<String>,
}

impl SegmentAnnotation {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_time < self.end_time) {
            return Err(Error::InvalidArgument(format!(
                "segment {} has start_time {} >= end_time {}",
                self.segment_id, self.start_time, self.end_time
            )));
        }
        if let Some(t) = self.turn_change_points.iter().find(|&&t| !(t > self.start_time && t < self.end_time)) {
            return Err(Error::InvalidArgument(format!(
                "segment {}: turn change point {t} is not inside ({}, {})",
                self.segment_id, self.start_time, self.end_time
            )));
        }
        Ok(())
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start_time && t < self.end_time
    }
}

/// Symmetric must-link and cannot-link sets over embedding indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    must: BTreeSet<Pair>,
    cannot: BTreeSet<Pair>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from raw pairs in either orientation. Self-pairs and pairs
    /// present in both lists are rejected.
    pub fn from_pairs(must: impl IntoIterator<Item = Pair>, cannot: impl IntoIterator<Item = Pair>) -> Result<Self> {
        let mut set = Self::new();
        for (i, j) in must {
            set.add_must(i, j)?;
        }
        for (i, j) in cannot {
            set.add_cannot(i, j)?;
        }
        Ok(set)
    }

    pub fn add_must(&mut self, i: usize, j: usize) -> Result<bool> {
        let p = canonical(i, j).ok_or_else(|| self_pair(i))?;
        if self.cannot.contains(&p) {
            return Err(Error::InvalidConstraints(format!(
                "pair ({}, {}) is both must-link and cannot-link",
                p.0, p.1
            )));
        }
        Ok(self.must.insert(p))
    }

    pub fn add_cannot(&mut self, i: usize, j: usize) -> Result<bool> {
        let p = canonical(i, j).ok_or_else(|| self_pair(i))?;
        if self.must.contains(&p) {
            return Err(Error::InvalidConstraints(format!(
                "pair ({}, {}) is both must-link and cannot-link",
                p.0, p.1
            )));
        }
        Ok(self.cannot.insert(p))
    }

    pub fn must(&self) -> &BTreeSet<Pair> {
        &self.must
    }

    pub fn cannot(&self) -> &BTreeSet<Pair> {
        &self.cannot
    }

    pub fn is_empty(&self) -> bool {
        self.must.is_empty() && self.cannot.is_empty()
    }

    pub fn len(&self) -> usize {
        self.must.len() + self.cannot.len()
    }

    pub fn is_constrained(&self, i: usize, j: usize) -> bool {
        canonical(i, j).is_some_and(|p| self.must.contains(&p) || self.cannot.contains(&p))
    }

    /// Largest index referenced by any pair.
    pub fn max_index(&self) -> Option<usize> {
        self.must.iter().chain(&self.cannot).map(|&(_, j)| j).max()
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.max_index() {
            Some(index) if index >= n => Err(Error::IndexOutOfRange { index, n }),
            _ => Ok(()),
        }
    }
}

fn self_pair(i: usize) -> Error {
    Error::InvalidConstraints(format!("self-pair ({i}, {i})"))
}

/// Output of [`build_constraints`]: the constraints plus every pair that
/// qualified as both must-link and cannot-link (resolved to cannot-link).
#[derive(Debug, Clone, Default)]
pub struct ConstraintBuild {
    pub constraints: ConstraintSet,
    pub conflicts: Vec<Pair>,
}

/// Derives constraints from annotated text segments.
///
/// Embeddings are associated with the segment containing their midpoint.
/// Inside a non-dialogue segment every pair of embeddings lying fully within
/// the segment is must-linked. Each turn change point cannot-links the last
/// embedding ending at or before it with the first embedding starting at or
/// after it, both taken from the segment holding the change point.
pub fn build_constraints(annotations: &[SegmentAnnotation], embeddings: &EmbeddingSet) -> Result<ConstraintBuild> {
    if annotations.is_empty() {
        return Err(Error::EmptyAnnotations);
    }
    for a in annotations {
        a.validate()?;
    }
    let mut segments: Vec<&SegmentAnnotation> = annotations.iter().collect();
    segments.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
    for w in segments.windows(2) {
        if w[1].start_time < w[0].end_time {
            return Err(Error::InvalidArgument(format!(
                "segments {} and {} overlap",
                w[0].segment_id, w[1].segment_id
            )));
        }
    }
    if embeddings.len() < 2 {
        return Ok(ConstraintBuild::default());
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); segments.len()];
    for rec in embeddings.records() {
        let mid = rec.midpoint();
        let seg = segments.iter().position(|s| s.contains(mid)).ok_or(Error::UncoveredEmbedding(rec.index))?;
        members[seg].push(rec.index);
    }

    let records = embeddings.records();
    let mut must = BTreeSet::new();
    let mut cannot = BTreeSet::new();
    for (seg, idx) in segments.iter().zip(&members) {
        if !seg.is_dialogue {
            let inside: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&k| records[k].start_time >= seg.start_time && records[k].end_time <= seg.end_time)
                .collect();
            for (a, &i) in inside.iter().enumerate() {
                for &j in &inside[a + 1..] {
                    must.extend(canonical(i, j));
                }
            }
        }
        for &t in &seg.turn_change_points {
            let before = idx
                .iter()
                .copied()
                .filter(|&k| records[k].end_time <= t)
                .max_by(|&a, &b| records[a].end_time.total_cmp(&records[b].end_time).then(a.cmp(&b)));
            let after = idx
                .iter()
                .copied()
                .filter(|&k| records[k].start_time >= t)
                .min_by(|&a, &b| records[a].start_time.total_cmp(&records[b].start_time).then(a.cmp(&b)));
            if let (Some(i), Some(j)) = (before, after) {
                cannot.extend(canonical(i, j));
            }
        }
    }

    let conflicts: Vec<Pair> = must.intersection(&cannot).copied().collect();
    for p in &conflicts {
        warn!("pair ({}, {}) qualifies as must-link and cannot-link; keeping cannot-link", p.0, p.1);
        must.remove(p);
    }
    Ok(ConstraintBuild { constraints: ConstraintSet { must, cannot }, conflicts })
}

/// Samples `floor(rate * N(N-1)/2)` distinct pairs uniformly and labels each
/// from the reference speakers. For a fixed seed the sampled pairs are a
/// prefix of one random ordering, so a higher rate yields a superset.
pub fn simulate_constraints<L: PartialEq>(labels: &[Option<L>], rate: f64, seed: u64) -> Result<ConstraintSet> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("constraint simulation needs at least 2 embeddings, got {n}")));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("constraint rate {rate} outside [0, 1]")));
    }
    if let Some(k) = labels.iter().position(Option::is_none) {
        return Err(Error::InvalidArgument(format!("embedding {k} has no label")));
    }
    let total = n * (n - 1) / 2;
    let count = ((rate * total as f64).floor() as usize).min(total);
    let mut rng = rng_from_seed(seed);
    let mut set = ConstraintSet::new();
    for flat in nested_sample(&mut rng, total, count) {
        let (i, j) = unflatten_pair(flat, n);
        if labels[i] == labels[j] {
            set.must.insert((i, j));
        } else {
            set.cannot.insert((i, j));
        }
    }
    Ok(set)
}

/// Same as [`simulate_constraints`] for fully labelled data.
pub fn simulate_from_labels<L: PartialEq + Clone>(labels: &[L], rate: f64, seed: u64) -> Result<ConstraintSet> {
    let wrapped: Vec<Option<L>> = labels.iter().cloned().map(Some).collect();
    simulate_constraints(&wrapped, rate, seed)
}

/// First `count` entries of a lazy Fisher-Yates shuffle of `0..total`.
fn nested_sample(rng: &mut Rng, total: usize, count: usize) -> Vec<usize> {
    let mut moved: HashMap<usize, usize> = HashMap::with_capacity(2 * count);
    (0..count)
        .map(|k| {
            let j = rng.random_range(k..total);
            let picked = moved.get(&j).copied().unwrap_or(j);
            let displaced = moved.get(&k).copied().unwrap_or(k);
            moved.insert(j, displaced);
            picked
        })
        .collect()
}

/// Maps a row-major index over the strict upper triangle back to `(i, j)`.
fn unflatten_pair(mut flat: usize, n: usize) -> Pair {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if flat < row {
            return (i, i + 1 + flat);
        }
        flat -= row;
        i += 1;
    }
}

/// Signed constraint matrix: `+1` for must-link, `-1` for cannot-link.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix(DMatrix<f64>);

impl ConstraintMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    #[cfg(test)]
    pub(crate) fn from_raw(z: DMatrix<f64>) -> Self {
        Self(z)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Reads the pair sets back from the nonzero upper-triangle entries.
    pub fn to_constraint_set(&self) -> ConstraintSet {
        let mut set = ConstraintSet::new();
        let n = self.n();
        for i in 0..n {
            for j in i + 1..n {
                let z = self.0[(i, j)];
                if z > 0.0 {
                    set.must.insert((i, j));
                } else if z < 0.0 {
                    set.cannot.insert((i, j));
                }
            }
        }
        set
    }
}

pub fn to_constraint_matrix(cs: &ConstraintSet, n: usize) -> Result<ConstraintMatrix> {
    cs.check_bounds(n)?;
    let mut z = DMatrix::zeros(n, n);
    for &(i, j) in cs.must() {
        z[(i, j)] = 1.0;
        z[(j, i)] = 1.0;
    }
    for &(i, j) in cs.cannot() {
        z[(i, j)] = -1.0;
        z[(j, i)] = -1.0;
    }
    Ok(ConstraintMatrix(z))
}

/// On-disk constraint file: `{"n": N, "must": [[i,j],...], "cannot": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub n: usize,
    pub must: Vec<[usize; 2]>,
    pub cannot: Vec<[usize; 2]>,
}

impl ConstraintFile {
    pub fn from_set(cs: &ConstraintSet, n: usize) -> Self {
        Self {
            n,
            must: cs.must().iter().map(|&(i, j)| [i, j]).collect(),
            cannot: cs.cannot().iter().map(|&(i, j)| [i, j]).collect(),
        }
    }

    pub fn into_set(self) -> Result<ConstraintSet> {
        let set = ConstraintSet::from_pairs(
            self.must.into_iter().map(|[i, j]| (i, j)),
            self.cannot.into_iter().map(|[i, j]| (i, j)),
        )?;
        set.check_bounds(self.n)?;
        Ok(set)
    }
}
