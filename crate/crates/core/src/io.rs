//! File formats: binary/CSV embeddings, session manifests, transcripts,
//! configs, RTTM output and matrix dumps.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clustering::DiarizationResult;
use crate::constraints::{ConstraintFile, ConstraintSet, SegmentAnnotation};
use crate::embedding::{norm, EmbeddingRecord, EmbeddingSet, UNIT_NORM_TOL};
use crate::error::{Error, Result};
use crate::metrics::{LabeledTranscript, Tokenization, TranscriptEntry};
use crate::pipeline::PipelineConfig;

pub const MAGIC: &[u8; 4] = b"JPCP";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Default embedding window when a session has no timing file.
pub const DEFAULT_WINDOW_SECONDS: f64 = 1.5;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Row-major `N x D` float32 matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbeddings {
    pub count: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl RawEmbeddings {
    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.dim.max(1)).take(self.count)
    }

    pub fn from_set(set: &EmbeddingSet) -> Self {
        Self { count: set.len(), dim: set.dim(), data: set.vectors().flatten().map(|&v| v as f32).collect() }
    }
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

/// Parses the binary embedding format: magic `JPCP`, then little-endian
/// `u32` version, count and dimension, then `count * dim` `f32` values.
pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<RawEmbeddings> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("file is {} bytes, shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(path, "bad magic at offset 0 (expected JPCP)"));
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version} at offset 4")));
    }
    let count = u32_at(bytes, 8) as usize;
    let dim = u32_at(bytes, 12) as usize;
    let expected = count
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "size mismatch: header declares {count}x{dim} ({expected} payload bytes) but file has {}",
                payload.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(count * dim);
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::format(path, format!("non-finite value at offset {}", HEADER_LEN + 4 * k)));
        }
        data.push(v);
    }
    Ok(RawEmbeddings { count, dim, data })
}

pub fn encode_binary(raw: &RawEmbeddings) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * raw.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(raw.count as u32).to_le_bytes());
    out.extend_from_slice(&(raw.dim as u32).to_le_bytes());
    for v in &raw.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// One embedding per line, comma separated, no header.
pub fn decode_csv(text: &str, path: &Path) -> Result<RawEmbeddings> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut dim = None;
    let mut count = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if dim.is_some_and(|d| d != record.len()) {
            return Err(Error::format(
                path,
                format!("line {} has {} columns, expected {}", line + 1, record.len(), dim.unwrap_or(0)),
            ));
        }
        dim = Some(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f32 = field.parse().map_err(|_| {
                Error::format(path, format!("line {} column {}: cannot parse '{field}'", line + 1, col + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("non-finite value at line {} column {}", line + 1, col + 1)));
            }
            data.push(v);
        }
        count += 1;
    }
    Ok(RawEmbeddings { count, dim: dim.unwrap_or(0), data })
}

pub fn encode_csv(raw: &RawEmbeddings) -> String {
    let mut out = String::new();
    for row in raw.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingFormat {
    Binary,
    Csv,
}

impl EmbeddingFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

pub fn read_raw_embeddings(path: &Path, format: Option<EmbeddingFormat>) -> Result<RawEmbeddings> {
    match format.unwrap_or_else(|| EmbeddingFormat::from_path(path)) {
        EmbeddingFormat::Binary => decode_binary(&read_bytes(path)?, path),
        EmbeddingFormat::Csv => decode_csv(&read_text(path)?, path),
    }
}

pub fn write_embeddings(path: &Path, set: &EmbeddingSet, format: EmbeddingFormat) -> Result<()> {
    let raw = RawEmbeddings::from_set(set);
    match format {
        EmbeddingFormat::Binary => write_file(path, encode_binary(&raw)),
        EmbeddingFormat::Csv => write_file(path, encode_csv(&raw)),
    }
}

/// Unit-normalizes float32 rows. Rescaled vectors are rounded back to
/// float32 so that writing and re-reading them is lossless.
pub fn normalize_rows(raw: &RawEmbeddings, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut worst = 0.0f64;
    let rows = raw
        .rows()
        .enumerate()
        .map(|(k, row)| {
            let v: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
            let n = norm(&v);
            if n == 0.0 {
                return Err(Error::format(path, format!("embedding {k} has zero norm")));
            }
            let dev = (n - 1.0).abs();
            worst = worst.max(dev);
            if dev > UNIT_NORM_TOL {
                Ok(v.iter().map(|x| f64::from((x / n) as f32)).collect())
            } else {
                Ok(v)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if worst > 1e-3 {
        warn!("{}: embeddings were not unit norm (max deviation {worst:.3e}); normalized", path.display());
    }
    Ok(rows)
}

/// Session description tying together the per-session files. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub session: String,
    pub embeddings: PathBuf,
    pub dim: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<EmbeddingFormat>,
    /// JSON array of `[start, end]` pairs, one per embedding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub window_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default)]
    pub tokenization: Tokenization,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_SECONDS
}

/// Transcript file: one entry per embedding with its reference speaker and
/// text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFile {
    #[serde(default)]
    pub session: String,
    pub entries: Vec<TranscriptFileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFileEntry {
    pub speaker: String,
    #[serde(default)]
    pub text: String,
}

impl TranscriptFile {
    pub fn to_labeled(&self, tokenization: Tokenization) -> LabeledTranscript {
        LabeledTranscript::new(
            self.session.clone(),
            self.entries
                .iter()
                .map(|e| TranscriptEntry { speaker: e.speaker.clone(), words: tokenization.tokenize(&e.text) })
                .collect(),
        )
    }

    pub fn from_labeled(t: &LabeledTranscript, tokenization: Tokenization) -> Self {
        let sep = match tokenization {
            Tokenization::Whitespace => " ",
            Tokenization::PerCharacter => "",
        };
        Self {
            session: t.session.clone(),
            entries: t
                .entries
                .iter()
                .map(|e| TranscriptFileEntry { speaker: e.speaker.clone(), text: e.words.join(sep) })
                .collect(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// Reads a TOML config, or JSON when the extension is `.json`.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let is_json = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Everything loaded for one session.
#[derive(Debug, Clone)]
pub struct LoadedSession {
    pub manifest: SessionManifest,
    pub embeddings: EmbeddingSet,
    pub annotations: Option<Vec<SegmentAnnotation>>,
    pub constraints: Option<ConstraintSet>,
    pub transcript: Option<LabeledTranscript>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_session(manifest_path: &Path) -> Result<LoadedSession> {
    let manifest: SessionManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let emb_path = resolve(base, &manifest.embeddings);
    let raw = read_raw_embeddings(&emb_path, manifest.format)?;
    if raw.count != manifest.count || raw.dim != manifest.dim {
        return Err(Error::format(
            &emb_path,
            format!("manifest declares {}x{} but file holds {}x{}", manifest.count, manifest.dim, raw.count, raw.dim),
        ));
    }
    let vectors = normalize_rows(&raw, &emb_path)?;

    let spans: Vec<(f64, f64)> = match &manifest.timing {
        Some(p) => {
            let p = resolve(base, p);
            let spans: Vec<(f64, f64)> = read_json(&p)?;
            if spans.len() != raw.count {
                return Err(Error::format(&p, format!("{} spans for {} embeddings", spans.len(), raw.count)));
            }
            spans
        }
        None => (0..raw.count)
            .map(|k| (k as f64 * manifest.window_seconds, (k + 1) as f64 * manifest.window_seconds))
            .collect(),
    };

    let transcript = match &manifest.transcript {
        Some(p) => {
            let p = resolve(base, p);
            let file: TranscriptFile = read_json(&p)?;
            if file.entries.len() != raw.count {
                return Err(Error::format(
                    &p,
                    format!("{} transcript entries for {} embeddings", file.entries.len(), raw.count),
                ));
            }
            let mut t = file.to_labeled(manifest.tokenization);
            if t.session.is_empty() {
                t.session = manifest.session.clone();
            }
            Some(t)
        }
        None => None,
    };

    let records = vectors
        .into_iter()
        .zip(spans)
        .enumerate()
        .map(|(k, (vector, (start_time, end_time)))| EmbeddingRecord {
            index: k,
            vector,
            start_time,
            end_time,
            words: transcript.as_ref().map(|t| t.entries[k].words.clone()),
        })
        .collect();
    let embeddings = EmbeddingSet::new(records).map_err(|e| Error::format(&emb_path, e.to_string()))?;

    let annotations = match &manifest.annotations {
        Some(p) => Some(read_json::<Vec<SegmentAnnotation>>(&resolve(base, p))?),
        None => None,
    };
    let constraints = match &manifest.constraints {
        Some(p) => {
            let p = resolve(base, p);
            let file: ConstraintFile = read_json(&p)?;
            if file.n != raw.count {
                return Err(Error::format(&p, format!("constraint file n = {} for {} embeddings", file.n, raw.count)));
            }
            Some(file.into_set().map_err(|e| Error::format(&p, e.to_string()))?)
        }
        None => None,
    };
    Ok(LoadedSession { manifest, embeddings, annotations, constraints, transcript })
}

/// RTTM lines for maximal runs of same-label consecutive embeddings.
pub fn rttm(result: &DiarizationResult, embeddings: &EmbeddingSet, session: &str) -> Result<String> {
    if result.labels.len() != embeddings.len() {
        return Err(Error::LengthMismatch { pred: result.labels.len(), truth: embeddings.len() });
    }
    let records = embeddings.records();
    let mut out = String::new();
    let mut k = 0;
    while k < records.len() {
        let label = result.labels[k];
        let start = records[k].start_time;
        let mut end = records[k].end_time;
        let mut next = k + 1;
        while next < records.len() && result.labels[next] == label {
            end = end.max(records[next].end_time);
            next += 1;
        }
        out.push_str(&format!("SPEAKER {session} 1 {start:.2} {:.2} <NA> <NA> spk{label} <NA> <NA>\n", end - start));
        k = next;
    }
    Ok(out)
}

/// Full-precision row-major CSV dump of a matrix.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Labels file written by `diarize` and accepted by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub session: String,
    pub labels: Vec<usize>,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<RunMetadata>,
}

/// Everything needed to reproduce a run: the full configuration, the values
/// it resolved to for this session, and the constraint counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub config: PipelineConfig,
    pub knn_k: usize,
    pub ssdr_out_dim: usize,
    pub constraint_source: String,
    pub must_links: usize,
    pub cannot_links: usize,
    pub constraint_rate: f64,
    pub eigenvalues: Vec<f64>,
}

impl RunMetadata {
    pub fn new(
        config: &PipelineConfig,
        embeddings: &EmbeddingSet,
        constraints: &ConstraintSet,
        source: &str,
        result: &DiarizationResult,
    ) -> Self {
        let n = embeddings.len();
        let pairs = n * n.saturating_sub(1) / 2;
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            knn_k: if n >= 2 { config.propagation.knn_k_for(n) } else { 0 },
            ssdr_out_dim: config.ssdr.out_dim_for(embeddings.dim()).unwrap_or(embeddings.dim()),
            constraint_source: source.to_string(),
            must_links: constraints.must().len(),
            cannot_links: constraints.cannot().len(),
            constraint_rate: if pairs == 0 { 0.0 } else { constraints.len() as f64 / pairs as f64 },
            eigenvalues: result.eigenvalues.clone(),
        }
    }
}
