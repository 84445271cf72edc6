//! Clustering and diarization scores: ARI, NMI, speaker-count difference,
//! cpWER and TextDER.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speaker maps up to this size are searched exhaustively in cpWER.
pub const EXHAUSTIVE_SPEAKER_LIMIT: usize = 8;

fn check_lengths(pred: usize, truth: usize) -> Result<()> {
    if pred != truth {
        return Err(Error::LengthMismatch { pred, truth });
    }
    Ok(())
}

/// Dense contingency table between two labelings.
struct Contingency {
    cells: Vec<Vec<u64>>,
    rows: Vec<u64>,
    cols: Vec<u64>,
    n: u64,
}

fn index_labels<T: Eq + Hash>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut map: HashMap<&T, usize> = HashMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (idx, map.len())
}

impl Contingency {
    fn new<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Self {
        let (p, np) = index_labels(pred);
        let (t, nt) = index_labels(truth);
        let mut cells = vec![vec![0u64; nt]; np];
        for (&a, &b) in p.iter().zip(&t) {
            cells[a][b] += 1;
        }
        let rows = cells.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..nt).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
        Self { cells, rows, cols, n: pred.len() as u64 }
    }
}

fn pairs(x: u64) -> i128 {
    let x = x as i128;
    x * (x - 1) / 2
}

/// Adjusted Rand index from the contingency table. The final value is a
/// single division of exact integers.
pub fn adjusted_rand_index<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::InvalidArgument("ARI needs at least one label".into()));
    }
    let c = Contingency::new(pred, truth);
    let index: i128 = c.cells.iter().flatten().map(|&v| pairs(v)).sum();
    let sum_a: i128 = c.rows.iter().map(|&v| pairs(v)).sum();
    let sum_b: i128 = c.cols.iter().map(|&v| pairs(v)).sum();
    let total = pairs(c.n);
    // (index - E) / (max - E) scaled through by 2 * total
    let num = 2 * total * index - 2 * sum_a * sum_b;
    let den = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Mutual information normalized by the geometric mean of the entropies.
pub fn normalized_mutual_information<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::InvalidArgument("NMI needs at least one label".into()));
    }
    let c = Contingency::new(pred, truth);
    let n = c.n as f64;
    let entropy = |counts: &[u64]| -> f64 {
        counts
            .iter()
            .filter(|&&v| v > 0)
            .map(|&v| {
                let p = v as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_pred = entropy(&c.rows);
    let h_truth = entropy(&c.cols);
    if c.rows.len() == 1 && c.cols.len() == 1 {
        return Ok(1.0);
    }
    if h_pred == 0.0 || h_truth == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.cells.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let joint = v as f64 / n;
            let expected = (c.rows[i] as f64 / n) * (c.cols[j] as f64 / n);
            mi += joint * (joint / expected).ln();
        }
    }
    Ok((mi / (h_pred * h_truth).sqrt()).clamp(0.0, 1.0))
}

pub fn speaker_count_diff(pred_k: usize, true_k: usize) -> usize {
    pred_k.abs_diff(true_k)
}

/// How text is split into scoring tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenization {
    #[default]
    Whitespace,
    /// Every non-whitespace character is a token (unsegmented scripts).
    PerCharacter,
}

impl Tokenization {
    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            Tokenization::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
            Tokenization::PerCharacter => text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
        }
    }
}

/// Speaker-attributed words, one entry per embedding in time order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabeledTranscript {
    pub session: String,
    pub entries: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: String,
    pub words: Vec<String>,
}

impl LabeledTranscript {
    pub fn new(session: impl Into<String>, entries: Vec<TranscriptEntry>) -> Self {
        Self { session: session.into(), entries }
    }

    /// Copies the words of `self` with speakers replaced by `labels`.
    pub fn relabeled<L: ToString>(&self, labels: &[L]) -> Result<Self> {
        check_lengths(labels.len(), self.entries.len())?;
        let entries = self
            .entries
            .iter()
            .zip(labels)
            .map(|(e, l)| TranscriptEntry { speaker: l.to_string(), words: e.words.clone() })
            .collect();
        Ok(Self { session: self.session.clone(), entries })
    }

    pub fn speakers(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.speaker.as_str()).collect()
    }

    pub fn word_count(&self) -> usize {
        self.entries.iter().map(|e| e.words.len()).sum()
    }

    /// Each speaker's words concatenated in entry order, speakers in order of
    /// first appearance.
    fn per_speaker_streams(&self) -> Vec<Vec<&str>> {
        let mut order: HashMap<&str, usize> = HashMap::new();
        let mut streams: Vec<Vec<&str>> = Vec::new();
        for e in &self.entries {
            let next = order.len();
            let k = *order.entry(e.speaker.as_str()).or_insert(next);
            if k == streams.len() {
                streams.push(Vec::new());
            }
            streams[k].extend(e.words.iter().map(String::as_str));
        }
        streams
    }

    fn flat_words(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().flat_map(|e| e.words.iter().map(move |w| (e.speaker.as_str(), w.as_str())))
    }
}

/// Token-level edit distance (substitutions, insertions, deletions).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Search strategy for the speaker mapping in cpWER.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeakerMapping {
    /// Exhaustive up to [`EXHAUSTIVE_SPEAKER_LIMIT`] speakers, Hungarian above.
    Auto,
    Exhaustive,
    Hungarian,
}

/// Edit count and reference length behind a cpWER value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordErrorCounts {
    pub errors: usize,
    pub reference_words: usize,
}

impl WordErrorCounts {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.reference_words as f64
    }
}

/// Minimum total cost over one-to-one maps of rows onto columns of a square
/// cost matrix, by trying every permutation.
fn min_cost_exhaustive(cost: &[Vec<i64>]) -> i64 {
    fn go(cost: &[Vec<i64>], row: usize, used: &mut [bool], acc: i64, best: &mut i64) {
        if acc >= *best {
            return;
        }
        if row == cost.len() {
            *best = acc;
            return;
        }
        for col in 0..cost.len() {
            if !used[col] {
                used[col] = true;
                go(cost, row + 1, used, acc + cost[row][col], best);
                used[col] = false;
            }
        }
    }
    let mut best = i64::MAX;
    go(cost, 0, &mut vec![false; cost.len()], 0, &mut best);
    best
}

fn min_cost_hungarian(cost: &[Vec<i64>]) -> i64 {
    if cost.is_empty() {
        return 0;
    }
    let weights = Matrix::from_rows(cost.iter().cloned()).expect("square cost matrix");
    kuhn_munkres_min(&weights).0
}

fn min_cost(cost: &[Vec<i64>], mapping: SpeakerMapping) -> i64 {
    match mapping {
        SpeakerMapping::Exhaustive => min_cost_exhaustive(cost),
        SpeakerMapping::Hungarian => min_cost_hungarian(cost),
        SpeakerMapping::Auto if cost.len() <= EXHAUSTIVE_SPEAKER_LIMIT => min_cost_exhaustive(cost),
        SpeakerMapping::Auto => min_cost_hungarian(cost),
    }
}

/// Concatenated minimum-permutation word error counts. Speaker lists are
/// padded with empty streams so unmatched speakers count as insertions or
/// deletions.
pub fn cpwer_counts(
    pred: &LabeledTranscript,
    truth: &LabeledTranscript,
    mapping: SpeakerMapping,
) -> Result<WordErrorCounts> {
    let reference_words = truth.word_count();
    if reference_words == 0 {
        return Err(Error::EmptyReference);
    }
    let hyp = pred.per_speaker_streams();
    let refs = truth.per_speaker_streams();
    let m = hyp.len().max(refs.len());
    let empty: Vec<&str> = Vec::new();
    let cost: Vec<Vec<i64>> = (0..m)
        .map(|p| {
            let h = hyp.get(p).unwrap_or(&empty);
            (0..m).map(|t| levenshtein(refs.get(t).unwrap_or(&empty), h) as i64).collect()
        })
        .collect();
    let errors = min_cost(&cost, mapping) as usize;
    Ok(WordErrorCounts { errors, reference_words })
}

pub fn cpwer(pred: &LabeledTranscript, truth: &LabeledTranscript) -> Result<f64> {
    cpwer_counts(pred, truth, SpeakerMapping::Auto).map(|c| c.rate())
}

/// Misattributed-word counts behind a TextDER value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttributionCounts {
    pub misattributed: usize,
    pub total_words: usize,
}

impl AttributionCounts {
    pub fn rate(&self) -> f64 {
        self.misattributed as f64 / self.total_words as f64
    }
}

/// Words assigned to the wrong speaker under the best one-to-one speaker map.
/// Both transcripts must carry the same word sequence.
pub fn text_der_counts(pred: &LabeledTranscript, truth: &LabeledTranscript) -> Result<AttributionCounts> {
    let p: Vec<(&str, &str)> = pred.flat_words().collect();
    let t: Vec<(&str, &str)> = truth.flat_words().collect();
    if p.len() != t.len() || p.iter().zip(&t).any(|(a, b)| a.1 != b.1) {
        return Err(Error::WordMismatch);
    }
    if t.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (pi, np) = index_labels(&p.iter().map(|x| x.0).collect::<Vec<_>>());
    let (ti, nt) = index_labels(&t.iter().map(|x| x.0).collect::<Vec<_>>());
    let m = np.max(nt);
    let mut overlap = vec![vec![0i64; m]; m];
    for (&a, &b) in pi.iter().zip(&ti) {
        overlap[a][b] -= 1;
    }
    let matched = (-min_cost_hungarian(&overlap)) as usize;
    Ok(AttributionCounts { misattributed: t.len() - matched, total_words: t.len() })
}

pub fn text_der(pred: &LabeledTranscript, truth: &LabeledTranscript) -> Result<f64> {
    text_der_counts(pred, truth).map(|c| c.rate())
}

/// Scores for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ari: f64,
    pub nmi: f64,
    pub spk_diff: usize,
    pub cpwer: Option<f64>,
    pub text_der: Option<f64>,
    #[serde(skip)]
    pub word_errors: Option<WordErrorCounts>,
    #[serde(skip)]
    pub attribution: Option<AttributionCounts>,
}

impl MetricsReport {
    /// Scores predicted labels against reference labels, adding the text
    /// metrics when transcripts are available.
    pub fn score<P, T>(
        pred: &[P],
        truth: &[T],
        transcripts: Option<(&LabeledTranscript, &LabeledTranscript)>,
    ) -> Result<Self>
    where
        P: Eq + Hash,
        T: Eq + Hash,
    {
        let ari = adjusted_rand_index(pred, truth)?;
        let nmi = normalized_mutual_information(pred, truth)?;
        let spk_diff = speaker_count_diff(index_labels(pred).1, index_labels(truth).1);
        let (mut word_errors, mut attribution) = (None, None);
        if let Some((p, t)) = transcripts {
            if t.word_count() > 0 {
                word_errors = Some(cpwer_counts(p, t, SpeakerMapping::Auto)?);
                attribution = text_der_counts(p, t).ok();
            }
        }
        Ok(Self {
            ari,
            nmi,
            spk_diff,
            cpwer: word_errors.map(|c| c.rate()),
            text_der: attribution.map(|c| c.rate()),
            word_errors,
            attribution,
        })
    }
}

/// Per-session reports plus corpus-level figures: mean ARI/NMI, summed
/// SpkDiff, and word-pooled cpWER/TextDER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub sessions: Vec<(String, MetricsReport)>,
    pub overall: MetricsReport,
}

impl CorpusReport {
    pub fn aggregate(sessions: Vec<(String, MetricsReport)>) -> Self {
        let n = sessions.len().max(1) as f64;
        let mean = |f: fn(&MetricsReport) -> f64| sessions.iter().map(|(_, r)| f(r)).sum::<f64>() / n;
        let word_errors = sessions.iter().map(|(_, r)| r.word_errors).collect::<Option<Vec<_>>>().map(|v| {
            v.iter().fold(WordErrorCounts::default(), |acc, c| WordErrorCounts {
                errors: acc.errors + c.errors,
                reference_words: acc.reference_words + c.reference_words,
            })
        });
        let attribution = sessions.iter().map(|(_, r)| r.attribution).collect::<Option<Vec<_>>>().map(|v| {
            v.iter().fold(AttributionCounts::default(), |acc, c| AttributionCounts {
                misattributed: acc.misattributed + c.misattributed,
                total_words: acc.total_words + c.total_words,
            })
        });
        let overall = MetricsReport {
            ari: mean(|r| r.ari),
            nmi: mean(|r| r.nmi),
            spk_diff: sessions.iter().map(|(_, r)| r.spk_diff).sum(),
            cpwer: word_errors.filter(|c| c.reference_words > 0).map(|c| c.rate()),
            text_der: attribution.filter(|c| c.total_words > 0).map(|c| c.rate()),
            word_errors,
            attribution,
        };
        Self { sessions, overall }
    }

    /// Plain-text table with one row per session and a pooled row.
    pub fn to_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.4}", 100.0 * x));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8} {:>10} {:>11} {:>13}",
            "Session", "ARI", "NMI", "SpkDiff #", "CpWER (%)", "TextDER (%)"
        );
        let rows =
            self.sessions.iter().map(|(s, r)| (s.as_str(), r)).chain(std::iter::once(("overall", &self.overall)));
        for (name, r) in rows {
            let _ = writeln!(
                out,
                "{:<16} {:>8.4} {:>8.4} {:>10} {:>11} {:>13}",
                name,
                r.ari,
                r.nmi,
                r.spk_diff,
                pct(r.cpwer),
                pct(r.text_der)
            );
        }
        out
    }
}
