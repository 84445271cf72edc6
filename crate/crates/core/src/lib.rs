//! Constraint-aware spectral clustering back-end for speaker diarization.
//!
//! Semantic speaker cues are turned into must-link / cannot-link pairs
//! ([`constraints`]), which then steer both the embedding projection
//! ([`ssdr`]) and the affinity matrix ([`propagation`], [`affinity`]) ahead
//! of spectral clustering ([`clustering`]). [`metrics`] scores the result
//! and [`simulation`] drives the whole thing on synthetic sessions.

// negated comparisons are how config checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affinity;
pub mod clustering;
pub mod constraints;
pub mod embedding;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod propagation;
pub mod rng;
pub mod simulation;
pub mod ssdr;

pub use affinity::AffinityMatrix;
pub use clustering::{ClusteringConfig, DiarizationResult};
pub use constraints::{ConstraintMatrix, ConstraintSet, SegmentAnnotation};
pub use embedding::{EmbeddingRecord, EmbeddingSet};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use pipeline::{PipelineConfig, Variant};
pub use propagation::{PropagatedConstraints, PropagationConfig};
pub use simulation::{SimulationConfig, SweepSpec};
pub use ssdr::SsdrConfig;
