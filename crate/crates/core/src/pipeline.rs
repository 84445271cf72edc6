//! End-to-end composition of the back-end stages for each method variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affinity::{apply_constraints, cosine_affinity, refine, AffinityMatrix};
use crate::clustering::{spectral_cluster, ClusteringConfig, DiarizationResult};
use crate::constraints::{to_constraint_matrix, ConstraintSet};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::propagation::{e2cp, e2cpm, PropagatedConstraints, PropagationConfig};
use crate::rng::derive_seed;
use crate::ssdr::{ssdr_project, ProjectionMatrix, SsdrConfig};

/// Which constraint-consuming stages run in front of spectral clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    #[serde(rename = "acoustic-only")]
    AcousticOnly,
    #[serde(rename = "ssdr+sc")]
    SsdrSc,
    #[serde(rename = "e2cp")]
    E2cp,
    #[serde(rename = "e2cpm")]
    E2cpm,
    #[serde(rename = "ssdr+e2cpm")]
    SsdrE2cpm,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::AcousticOnly, Variant::SsdrSc, Variant::E2cp, Variant::E2cpm, Variant::SsdrE2cpm];

    pub fn name(self) -> &'static str {
        match self {
            Variant::AcousticOnly => "acoustic-only",
            Variant::SsdrSc => "ssdr+sc",
            Variant::E2cp => "e2cp",
            Variant::E2cpm => "e2cpm",
            Variant::SsdrE2cpm => "ssdr+e2cpm",
        }
    }

    pub fn uses_ssdr(self) -> bool {
        matches!(self, Variant::SsdrSc | Variant::SsdrE2cpm)
    }

    pub fn uses_propagation(self) -> bool {
        matches!(self, Variant::E2cp | Variant::E2cpm | Variant::SsdrE2cpm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant '{s}'")))
    }
}

/// Every tunable of the back-end in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub variant: Variant,
    /// Root of all randomness in a run.
    pub seed: u64,
    pub row_keep_fraction: f64,
    pub ssdr: SsdrConfig,
    pub propagation: PropagationConfig,
    pub clustering: ClusteringConfig,
    /// Write intermediate matrices as CSV next to the outputs.
    pub dump_matrices: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::default(),
            seed: 0,
            row_keep_fraction: 0.1,
            ssdr: SsdrConfig::default(),
            propagation: PropagationConfig::default(),
            clustering: ClusteringConfig::default(),
            dump_matrices: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.row_keep_fraction > 0.0 && self.row_keep_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("row_keep_fraction {} outside (0, 1]", self.row_keep_fraction)));
        }
        self.ssdr.validate()?;
        self.propagation.validate()?;
        self.clustering.validate()
    }

    /// Copies with the stage seeds filled in from the top-level seed.
    pub fn seeded(&self) -> Self {
        let mut cfg = self.clone();
        cfg.propagation.seed = derive_seed(self.seed, &[1]);
        cfg.clustering.seed = derive_seed(self.seed, &[2]);
        cfg
    }
}

/// Clustering result plus the intermediates that produced it.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: DiarizationResult,
    pub affinity: AffinityMatrix,
    pub adjusted_affinity: AffinityMatrix,
    pub propagated: Option<PropagatedConstraints>,
    pub projection: Option<ProjectionMatrix>,
}

/// Runs the configured variant. Stages that consume constraints are skipped
/// when the constraint set is empty, so every variant falls back to the
/// acoustic-only path without constraints.
pub fn run_pipeline(embeddings: &EmbeddingSet, cs: &ConstraintSet, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::InvalidArgument("session has no embeddings".into()));
    }
    cs.check_bounds(n)?;
    let cfg = cfg.seeded();
    let active = !cs.is_empty() && n >= 2;

    let mut projection = None;
    let projected;
    let features = if cfg.variant.uses_ssdr() && active {
        let out = ssdr_project(embeddings, cs, &cfg.ssdr)?;
        projection = Some(out.projection);
        projected = out.embeddings;
        &projected
    } else {
        embeddings
    };

    let affinity = refine(&cosine_affinity(features)?, cfg.row_keep_fraction)?;

    let propagated = if cfg.variant.uses_propagation() && active {
        Some(match cfg.variant {
            Variant::E2cp => e2cp(&to_constraint_matrix(cs, n)?, &affinity, cfg.propagation.lambda)?,
            _ => e2cpm(cs, &affinity, &cfg.propagation)?,
        })
    } else {
        None
    };
    let adjusted_affinity = match &propagated {
        Some(z) => apply_constraints(&affinity, z)?,
        None => affinity.clone(),
    };

    let result = spectral_cluster(&adjusted_affinity, &cfg.clustering)?;
    Ok(PipelineOutput { result, affinity, adjusted_affinity, propagated, projection })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> EmbeddingSet {
        let vectors = vec![
            vec![1.0, 0.1, 0.0],
            vec![1.0, -0.1, 0.05],
            vec![0.9, 0.0, -0.1],
            vec![0.0, 1.0, 0.1],
            vec![0.1, 1.0, -0.1],
            vec![0.0, 0.9, 0.0],
        ];
        EmbeddingSet::from_vectors(vectors, 1.0).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn empty_constraints_fall_back_to_acoustic() {
        let emb = session();
        let base = run_pipeline(&emb, &ConstraintSet::new(), &PipelineConfig::default()).unwrap();
        for v in Variant::ALL {
            let cfg = PipelineConfig { variant: v, ..Default::default() };
            let out = run_pipeline(&emb, &ConstraintSet::new(), &cfg).unwrap();
            assert_eq!(out.result, base.result);
            assert_eq!(out.adjusted_affinity, base.adjusted_affinity);
        }
    }

    #[test]
    fn clusters_two_groups() {
        // each row keeps itself and its two group mates
        let cfg = PipelineConfig { row_keep_fraction: 0.5, ..Default::default() };
        let out = run_pipeline(&session(), &ConstraintSet::new(), &cfg).unwrap();
        assert_eq!(out.result.labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn out_of_range_constraints_rejected() {
        let cs = ConstraintSet::from_pairs([(0, 9)], []).unwrap();
        assert!(run_pipeline(&session(), &cs, &PipelineConfig::default()).is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = PipelineConfig { variant: Variant::SsdrE2cpm, seed: 17, ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: PipelineConfig = toml::from_str("variant = \"e2cp\"\n[propagation]\nlambda = 0.8\n").unwrap();
        assert_eq!(partial.variant, Variant::E2cp);
        assert_eq!(partial.propagation.lambda, 0.8);
        assert_eq!(partial.row_keep_fraction, 0.1);
        assert!(toml::from_str::<PipelineConfig>("lamda = 0.3").is_err());
    }
}
