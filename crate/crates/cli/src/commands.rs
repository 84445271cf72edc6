use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};

use jpcp_core::constraints::build_constraints;
use jpcp_core::io::{
    load_session, matrix_csv, read_config, read_json, rttm, to_json_pretty, write_embeddings, write_file,
    EmbeddingFormat, LabelsFile, RunMetadata, SessionManifest, TranscriptFile,
};
use jpcp_core::metrics::{LabeledTranscript, Tokenization};
use jpcp_core::simulation::{generate_session, run_sweep};
use jpcp_core::{ConstraintSet, Error, MetricsReport, PipelineConfig, SimulationConfig, SweepSpec, Variant};

/// Invalid arguments or config values count as usage errors; everything
/// else (missing or malformed files, degenerate data) is a data error.
pub fn is_usage_error(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| cause.downcast_ref::<Error>().is_some_and(|err| !err.is_data_error()))
}

#[derive(Debug, Args)]
pub struct DiarizeArgs {
    /// Session manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config (TOML, or JSON by extension). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured variant.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the intermediate matrices as CSV.
    #[arg(long)]
    pub dump_matrices: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (TOML or JSON). Defaults to the standard hard instance.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Session id written into the manifest and transcript.
    #[arg(long, default_value = "sim")]
    pub session: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep spec (TOML or JSON). Defaults to the standard hard-instance sweep.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labels JSON written by `diarize`, or a transcript JSON.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference transcript JSON.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value = "whitespace")]
    pub tokenization: TokenizationArg,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TokenizationArg {
    Whitespace,
    PerCharacter,
}

impl From<TokenizationArg> for Tokenization {
    fn from(t: TokenizationArg) -> Self {
        match t {
            TokenizationArg::Whitespace => Tokenization::Whitespace,
            TokenizationArg::PerCharacter => Tokenization::PerCharacter,
        }
    }
}

fn load_pipeline_config(args: &DiarizeArgs) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.dump_matrices |= args.dump_matrices;
    cfg.validate()?;
    Ok(cfg)
}

fn speaker_labels(t: &LabeledTranscript) -> Vec<&str> {
    t.entries.iter().map(|e| e.speaker.as_str()).collect()
}

pub fn diarize(args: &DiarizeArgs) -> Result<()> {
    let cfg = load_pipeline_config(args)?;
    let session = load_session(&args.manifest)?;
    let name = session.manifest.session.clone();

    let (constraints, source) = match (&session.constraints, &session.annotations) {
        (Some(cs), _) => (cs.clone(), "file"),
        (None, Some(annotations)) => {
            let built = build_constraints(annotations, &session.embeddings)?;
            if !built.conflicts.is_empty() {
                warn!("{name}: {} must-links dropped as conflicting with cannot-links", built.conflicts.len());
            }
            (built.constraints, "annotations")
        }
        (None, None) => (ConstraintSet::new(), "none"),
    };
    info!(
        "{name}: {} embeddings, {} must-links, {} cannot-links ({source})",
        session.embeddings.len(),
        constraints.must().len(),
        constraints.cannot().len()
    );

    let out = jpcp_core::pipeline::run_pipeline(&session.embeddings, &constraints, &cfg)?;
    let result = &out.result;
    let dir = &args.out;

    write_file(&dir.join(format!("{name}.rttm")), rttm(result, &session.embeddings, &name)?)?;
    let labels = LabelsFile {
        session: name.clone(),
        labels: result.labels.clone(),
        k: result.k,
        metadata: Some(RunMetadata::new(&cfg, &session.embeddings, &constraints, source, result)),
    };
    write_file(&dir.join(format!("{name}.labels.json")), to_json_pretty(&labels))?;

    if let Some(truth) = &session.transcript {
        let pred = truth.relabeled(&result.labels)?;
        let report = MetricsReport::score(&result.labels, &speaker_labels(truth), Some((&pred, truth)))?;
        write_file(&dir.join(format!("{name}.metrics.json")), to_json_pretty(&report))?;
    }

    if cfg.dump_matrices {
        write_file(&dir.join(format!("{name}.affinity.csv")), matrix_csv(out.affinity.as_matrix()))?;
        write_file(&dir.join(format!("{name}.adjusted.csv")), matrix_csv(out.adjusted_affinity.as_matrix()))?;
        if let Some(z) = &out.propagated {
            write_file(&dir.join(format!("{name}.propagated.csv")), matrix_csv(z.as_matrix()))?;
        }
        if let Some(w) = &out.projection {
            write_file(&dir.join(format!("{name}.projection.csv")), matrix_csv(w.as_matrix()))?;
        }
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg: SimulationConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => SimulationConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let session = generate_session(&cfg)?;
    let dir = &args.out;

    write_embeddings(&dir.join("embeddings.bin"), &session.embeddings, EmbeddingFormat::Binary)?;
    write_file(&dir.join("annotations.json"), to_json_pretty(&session.annotations))?;
    let transcript = session.reference_transcript(&args.session);
    write_file(
        &dir.join("transcript.json"),
        to_json_pretty(&TranscriptFile::from_labeled(&transcript, Tokenization::Whitespace)),
    )?;
    let manifest = SessionManifest {
        session: args.session.clone(),
        embeddings: "embeddings.bin".into(),
        dim: session.embeddings.dim(),
        count: session.embeddings.len(),
        format: Some(EmbeddingFormat::Binary),
        timing: None,
        window_seconds: cfg.window_seconds,
        annotations: Some("annotations.json".into()),
        constraints: None,
        transcript: Some("transcript.json".into()),
        tokenization: Tokenization::Whitespace,
    };
    write_file(&dir.join("manifest.json"), to_json_pretty(&manifest))?;
    write_file(&dir.join("simulation.json"), to_json_pretty(&cfg))?;
    info!(
        "wrote {} embeddings from {} speakers to {}",
        session.embeddings.len(),
        session.num_speakers(),
        dir.display()
    );
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let spec: SweepSpec = match &args.spec {
        Some(p) => read_config(p)?,
        None => SweepSpec::default(),
    };
    let report = run_sweep(&spec)?;
    let dir = &args.out;
    write_file(&dir.join("rows.csv"), report.rows_csv())?;
    write_file(&dir.join("summary.csv"), report.summary_csv())?;
    write_file(&dir.join("sweep.json"), to_json_pretty(&spec))?;
    for (rate, ari) in report.mean_ari() {
        info!("rate {rate}: mean ARI {ari:.4}");
    }
    Ok(())
}

/// Predicted speakers per embedding, from either accepted file shape.
fn read_prediction(path: &Path, truth: &LabeledTranscript, tokenization: Tokenization) -> Result<LabeledTranscript> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("labels").is_some() {
        let labels: LabelsFile = serde_json::from_value(value).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(truth.relabeled(&labels.labels)?)
    } else if value.get("entries").is_some() {
        let file: TranscriptFile = serde_json::from_value(value).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(file.to_labeled(tokenization))
    } else {
        Err(Error::format(path, "expected a labels file or a transcript").into())
    }
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let tokenization = Tokenization::from(args.tokenization);
    let truth = read_json::<TranscriptFile>(&args.truth)?.to_labeled(tokenization);
    let pred = read_prediction(&args.pred, &truth, tokenization)?;
    if pred.entries.len() != truth.entries.len() {
        bail!(Error::LengthMismatch { pred: pred.entries.len(), truth: truth.entries.len() });
    }
    let report = MetricsReport::score(&speaker_labels(&pred), &speaker_labels(&truth), Some((&pred, &truth)))
        .with_context(|| format!("scoring {}", args.pred.display()))?;
    let text = to_json_pretty(&report);
    print!("{text}");
    if let Some(out) = &args.out {
        write_file(out, &text)?;
    }
    Ok(())
}
