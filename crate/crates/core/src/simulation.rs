//! Synthetic multi-speaker sessions and the constraint-rate sweep harness.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::{Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{simulate_from_labels, SegmentAnnotation};
use crate::embedding::{EmbeddingRecord, EmbeddingSet};
use crate::error::{Error, Result};
use crate::metrics::{LabeledTranscript, MetricsReport, TranscriptEntry};
use crate::pipeline::{run_pipeline, PipelineConfig, Variant};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Rejection budget for drawing separated speaker centroids.
pub const MAX_CENTROID_REJECTIONS: usize = 10_000;

const VOCABULARY: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub num_speakers: usize,
    /// Inclusive range of embeddings per speaker.
    pub embeddings_per_speaker: [usize; 2],
    pub dim: usize,
    /// Concentration of each speaker cluster; noise scale is `1 / spread`.
    pub intra_speaker_spread: f64,
    /// Minimum angle between any two speaker centroids, in degrees.
    pub inter_speaker_separation: f64,
    /// Mean length of a same-speaker run.
    pub turn_structure: f64,
    /// Duration of each embedding window in seconds.
    pub window_seconds: f64,
    /// Inclusive range of synthetic words per embedding.
    pub words_per_embedding: [usize; 2],
    pub seed: u64,
}

impl Default for SimulationConfig {
    /// The standard hard instance used for sweeps.
    fn default() -> Self {
        Self {
            num_speakers: 8,
            embeddings_per_speaker: [10, 30],
            dim: 64,
            intra_speaker_spread: 12.25,
            inter_speaker_separation: 25.0,
            turn_structure: 3.0,
            window_seconds: 1.5,
            words_per_embedding: [2, 6],
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_speakers == 0 {
            return bad("num_speakers must be at least 1".into());
        }
        if self.dim < 2 {
            return bad(format!("dim {} must be at least 2", self.dim));
        }
        if !(self.intra_speaker_spread > 0.0) {
            return bad(format!("spread {} must be positive", self.intra_speaker_spread));
        }
        if !(self.inter_speaker_separation > 0.0 && self.inter_speaker_separation < 180.0) {
            return bad(format!("separation {} outside (0, 180)", self.inter_speaker_separation));
        }
        let [lo, hi] = self.embeddings_per_speaker;
        if lo == 0 || lo > hi {
            return bad(format!("embeddings_per_speaker range [{lo}, {hi}] is invalid"));
        }
        let [wlo, whi] = self.words_per_embedding;
        if wlo > whi {
            return bad(format!("words_per_embedding range [{wlo}, {whi}] is invalid"));
        }
        if !(self.turn_structure >= 1.0) {
            return bad(format!("turn_structure {} must be at least 1", self.turn_structure));
        }
        if !(self.window_seconds > 0.0) {
            return bad(format!("window_seconds {} must be positive", self.window_seconds));
        }
        Ok(())
    }
}

/// A generated session with its reference labels and annotations.
#[derive(Debug, Clone)]
pub struct Session {
    pub embeddings: EmbeddingSet,
    pub labels: Vec<usize>,
    pub annotations: Vec<SegmentAnnotation>,
}

impl Session {
    pub fn num_speakers(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Reference transcript built from the synthetic words.
    pub fn reference_transcript(&self, session: &str) -> LabeledTranscript {
        let entries = self
            .embeddings
            .records()
            .iter()
            .zip(&self.labels)
            .map(|(r, l)| TranscriptEntry { speaker: format!("spk{l}"), words: r.words.clone().unwrap_or_default() })
            .collect();
        LabeledTranscript::new(session, entries)
    }
}

fn unit_gaussian(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Proposals lie on a cone of half-angle `min(separation, 90)` degrees around
/// a random anchor, so the separation bound is close to binding; proposals
/// closer than the bound to an accepted centroid are rejected.
fn sample_centroids(cfg: &SimulationConfig, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let max_cos = cfg.inter_speaker_separation.to_radians().cos();
    let (sin_phi, cos_phi) = cfg.inter_speaker_separation.min(90.0).to_radians().sin_cos();
    let anchor = unit_gaussian(rng, cfg.dim);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_speakers);
    let mut rejections = 0;
    while centroids.len() < cfg.num_speakers {
        let mut u = unit_gaussian(rng, cfg.dim);
        let along = dot(&u, &anchor);
        u.iter_mut().zip(&anchor).for_each(|(x, a)| *x -= along * a);
        let norm = dot(&u, &u).sqrt();
        if norm < 1e-9 {
            continue;
        }
        let c: Vec<f64> = anchor.iter().zip(&u).map(|(a, x)| cos_phi * a + sin_phi * x / norm).collect();
        if centroids.iter().all(|o| dot(o, &c) <= max_cos) {
            centroids.push(c);
        } else {
            rejections += 1;
            if rejections >= MAX_CENTROID_REJECTIONS {
                return Err(Error::CentroidSampling(rejections));
            }
        }
    }
    Ok(centroids)
}

/// Speaker sequence made of runs with geometric lengths. Each run picks a
/// speaker other than the previous one, weighted by how many embeddings it
/// still has to emit.
fn speaker_sequence(counts: &[usize], mean_run: f64, rng: &mut Rng) -> Vec<usize> {
    let mut remaining = counts.to_vec();
    let total: usize = counts.iter().sum();
    let mut seq = Vec::with_capacity(total);
    let run_dist = Geometric::new(1.0 / mean_run).expect("mean run length >= 1");
    let mut prev: Option<usize> = None;
    while seq.len() < total {
        let weights: Vec<usize> =
            remaining.iter().enumerate().map(|(s, &r)| if Some(s) == prev { 0 } else { r }).collect();
        let speaker = match WeightedIndex::new(&weights) {
            Ok(w) => w.sample(rng),
            Err(_) => prev.expect("some speaker has embeddings left"),
        };
        let run = (1 + run_dist.sample(rng) as usize).min(remaining[speaker]);
        seq.extend(std::iter::repeat_n(speaker, run));
        remaining[speaker] -= run;
        prev = Some(speaker);
    }
    seq
}

/// Splits a label sequence into maximal same-label runs `(start, end)`.
pub fn runs(labels: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=labels.len() {
        if k == labels.len() || labels[k] != labels[start] {
            out.push((start, k));
            start = k;
        }
    }
    out
}

pub fn generate_session(cfg: &SimulationConfig) -> Result<Session> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let centroids = sample_centroids(cfg, &mut rng)?;
    let [lo, hi] = cfg.embeddings_per_speaker;
    let counts: Vec<usize> = (0..cfg.num_speakers).map(|_| rng.random_range(lo..=hi)).collect();
    let labels = speaker_sequence(&counts, cfg.turn_structure, &mut rng);

    let noise_scale = 1.0 / cfg.intra_speaker_spread;
    let [wlo, whi] = cfg.words_per_embedding;
    let records = labels
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let c = &centroids[s];
            let mut g: Vec<f64> = (0..cfg.dim).map(|_| noise_scale * rng.sample::<f64, _>(StandardNormal)).collect();
            // tangent-plane noise at the centroid
            let along = dot(&g, c);
            g.iter_mut().zip(c).for_each(|(x, ci)| *x -= along * ci);
            let mut vector: Vec<f64> = c.iter().zip(&g).map(|(a, b)| a + b).collect();
            let norm = dot(&vector, &vector).sqrt();
            vector.iter_mut().for_each(|x| *x /= norm);
            let words =
                (0..rng.random_range(wlo..=whi)).map(|_| format!("w{}", rng.random_range(0..VOCABULARY))).collect();
            EmbeddingRecord {
                index: k,
                vector,
                start_time: k as f64 * cfg.window_seconds,
                end_time: (k + 1) as f64 * cfg.window_seconds,
                words: Some(words),
            }
        })
        .collect();
    let embeddings = EmbeddingSet::new(records)?;
    let annotations = annotate(&labels, cfg.window_seconds, &mut rng);
    Ok(Session { embeddings, labels, annotations })
}

/// Groups one to three consecutive runs into a segment. Single-run segments
/// are non-dialogue; multi-run segments carry the internal turn changes.
fn annotate(labels: &[usize], window: f64, rng: &mut Rng) -> Vec<SegmentAnnotation> {
    let all_runs = runs(labels);
    let mut segments = Vec::new();
    let mut r = 0;
    while r < all_runs.len() {
        let take = rng.random_range(1..=3usize).min(all_runs.len() - r);
        let group = &all_runs[r..r + take];
        let start = group[0].0 as f64 * window;
        let end = group[take - 1].1 as f64 * window;
        let turn_change_points = group[1..].iter().map(|&(s, _)| s as f64 * window).collect();
        segments.push(SegmentAnnotation {
            segment_id: segments.len(),
            start_time: start,
            end_time: end,
            is_dialogue: take > 1,
            turn_change_points,
            speaker_label: (take == 1).then(|| format!("spk{}", labels[group[0].0])),
        });
        r += take;
    }
    segments
}

/// A grid of constraint rates crossed with repeated synthetic trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub constraint_rates: Vec<f64>,
    pub trials_per_rate: usize,
    pub pipeline_variant: Variant,
    pub base: SimulationConfig,
    /// When set, each trial draws its speaker count uniformly from this
    /// inclusive range instead of using `base.num_speakers`.
    pub speaker_range: Option<[usize; 2]>,
    pub pipeline: PipelineConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            constraint_rates: vec![0.0, 0.01, 0.03, 0.06, 0.12],
            trials_per_rate: 20,
            pipeline_variant: Variant::SsdrE2cpm,
            base: SimulationConfig::default(),
            speaker_range: None,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_rate == 0 {
            return Err(Error::InvalidArgument("trials_per_rate must be at least 1".into()));
        }
        if self.constraint_rates.is_empty() {
            return Err(Error::InvalidArgument("no constraint rates given".into()));
        }
        if self.constraint_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidArgument("constraint rates must lie in [0, 1]".into()));
        }
        if self.constraint_rates.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("constraint rates must be sorted ascending".into()));
        }
        if let Some([lo, hi]) = self.speaker_range {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidArgument(format!("speaker_range [{lo}, {hi}] is invalid")));
            }
        }
        self.base.validate()?;
        self.pipeline.validate()
    }

    /// Session config for one trial. Sessions depend only on the trial index,
    /// so every rate sees the same sessions.
    pub fn trial_session(&self, trial: usize) -> SimulationConfig {
        let seed = derive_seed(self.base.seed, &[0, trial as u64]);
        let num_speakers = match self.speaker_range {
            Some([lo, hi]) => lo + (derive_seed(seed, &[9]) % (hi - lo + 1) as u64) as usize,
            None => self.base.num_speakers,
        };
        SimulationConfig { seed, num_speakers, ..self.base.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rate: f64,
    pub trial: usize,
    pub variant: Variant,
    pub ari: f64,
    pub nmi: f64,
    pub spk_diff: usize,
    pub text_der: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rate: f64,
    pub variant: Variant,
    pub trials: usize,
    pub ari_mean: f64,
    pub ari_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub spk_diff_mean: f64,
    pub spk_diff_std: f64,
    pub text_der_mean: f64,
    pub text_der_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl SweepReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("rate,trial,variant,ari,nmi,spk_diff,text_der\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.rate, r.trial, r.variant, r.ari, r.nmi, r.spk_diff, r.text_der
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "rate,variant,trials,ari_mean,ari_std,nmi_mean,nmi_std,spk_diff_mean,spk_diff_std,text_der_mean,text_der_std\n",
        );
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                s.rate,
                s.variant,
                s.trials,
                s.ari_mean,
                s.ari_std,
                s.nmi_mean,
                s.nmi_std,
                s.spk_diff_mean,
                s.spk_diff_std,
                s.text_der_mean,
                s.text_der_std
            ));
        }
        out
    }

    pub fn mean_ari(&self) -> Vec<(f64, f64)> {
        self.summary.iter().map(|s| (s.rate, s.ari_mean)).collect()
    }
}

/// Simulates constraints at `rate` for a session, runs the pipeline and
/// scores it against the reference.
pub fn run_trial(
    session: &Session,
    rate: f64,
    constraint_seed: u64,
    pipeline: &PipelineConfig,
) -> Result<(MetricsReport, usize)> {
    let cs = if rate > 0.0 && session.labels.len() >= 2 {
        simulate_from_labels(&session.labels, rate, constraint_seed)?
    } else {
        Default::default()
    };
    let out = run_pipeline(&session.embeddings, &cs, pipeline)?;
    let truth = session.reference_transcript("synthetic");
    let pred = truth.relabeled(&out.result.labels)?;
    let report = MetricsReport::score(&out.result.labels, &session.labels, Some((&pred, &truth)))?;
    Ok((report, out.result.k))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let sessions: Vec<Session> = (0..spec.trials_per_rate)
        .into_par_iter()
        .map(|t| generate_session(&spec.trial_session(t)))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> =
        (0..spec.constraint_rates.len()).flat_map(|r| (0..spec.trials_per_rate).map(move |t| (r, t))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(r, t)| {
            let rate = spec.constraint_rates[r];
            let pipeline = PipelineConfig {
                variant: spec.pipeline_variant,
                seed: derive_seed(spec.base.seed, &[2, t as u64]),
                ..spec.pipeline.clone()
            };
            // one pair ordering per trial: higher rates extend lower ones
            let constraint_seed = derive_seed(spec.base.seed, &[1, t as u64]);
            let (report, _) = run_trial(&sessions[t], rate, constraint_seed, &pipeline)?;
            Ok(SweepRow {
                rate,
                trial: t,
                variant: spec.pipeline_variant,
                ari: report.ari,
                nmi: report.nmi,
                spk_diff: report.spk_diff,
                text_der: report.text_der.unwrap_or(0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = spec
        .constraint_rates
        .iter()
        .enumerate()
        .map(|(r, &rate)| {
            let group = &rows[r * spec.trials_per_rate..(r + 1) * spec.trials_per_rate];
            let (ari_mean, ari_std) = mean_std(group.iter().map(|x| x.ari));
            let (nmi_mean, nmi_std) = mean_std(group.iter().map(|x| x.nmi));
            let (spk_diff_mean, spk_diff_std) = mean_std(group.iter().map(|x| x.spk_diff as f64));
            let (text_der_mean, text_der_std) = mean_std(group.iter().map(|x| x.text_der));
            SweepSummary {
                rate,
                variant: spec.pipeline_variant,
                trials: group.len(),
                ari_mean,
                ari_std,
                nmi_mean,
                nmi_std,
                spk_diff_mean,
                spk_diff_std,
                text_der_mean,
                text_der_std,
            }
        })
        .collect();
    Ok(SweepReport { rows, summary })
}
