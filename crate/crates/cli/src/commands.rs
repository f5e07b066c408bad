//! The `uijepa` subcommands. Each writes its artifacts under the run
//! directory, echoes the config and seals the directory with a MANIFEST.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uijepa_core::checkpoint::Checkpoint;
use uijepa_core::datagen::{build_dataset, Category, Split};
use uijepa_core::decoder::{Finetuner, Prediction};
use uijepa_core::jepa::{JepaLossReport, JepaModel};
use uijepa_core::masking::{GROUP_LONG, GROUP_SHORT, GROUP_TEMPORAL};
use uijepa_core::video::TokenGrid;

use crate::artifacts::RunDir;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, Dataset, EncoderSource, MetricsRow, Stage};

pub const JEPA_CHECKPOINT: &str = "jepa.uij";
pub const JEPA_LOSS: &str = "jepa_loss.csv";
pub const MODEL_CHECKPOINT: &str = "model.uij";
pub const DECODER_LOSS: &str = "decoder_loss.csv";
pub const METRICS: &str = "metrics.csv";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const ANALYSIS: &str = "analysis.json";
pub const PROJECTION: &str = "projection.json";

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    /// Config file text, echoed verbatim.
    pub config_text: String,
    pub out: PathBuf,
    pub threads: usize,
}

impl Run {
    fn dir(&self) -> CliResult<RunDir> {
        let d = RunDir::create(&self.out)?;
        d.echo_config(&self.config_text, &self.config)?;
        Ok(d)
    }
}

pub fn cmd_datagen(run: &Run) -> CliResult<usize> {
    let dir = run.dir()?;
    let samples = build_dataset(&run.config.dataset_config(), &dir.root)?;
    dir.seal()?;
    Ok(samples.len())
}

/// One row of the JEPA loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JepaLossRow {
    pub step: u64,
    pub loss: f64,
    pub embedding_std: f64,
    pub loss_short: Option<f64>,
    pub loss_long: Option<f64>,
    pub loss_temporal: Option<f64>,
    pub skipped_groups: usize,
}

impl JepaLossRow {
    pub fn new(step: u64, r: &JepaLossReport) -> Self {
        JepaLossRow {
            step,
            loss: r.total,
            embedding_std: r.embedding_std,
            loss_short: r.per_group_loss.get(GROUP_SHORT).copied(),
            loss_long: r.per_group_loss.get(GROUP_LONG).copied(),
            loss_temporal: r.per_group_loss.get(GROUP_TEMPORAL).copied(),
            skipped_groups: r.skipped_groups,
        }
    }
}

/// Train the JEPA stage (optionally resuming from a checkpoint, optionally
/// stopping early) and return the loss rows of the steps taken.
pub fn cmd_jepa_tune(
    run: &Run,
    dataset: &Path,
    resume: Option<&Path>,
    stop_after: Option<u64>,
) -> CliResult<Vec<JepaLossRow>> {
    let data = Dataset::load(dataset, run.config.dataset.res, run.threads)?;
    let dir = run.dir()?;
    let mut model = match resume {
        Some(p) => {
            let m = JepaModel::<f32>::from_checkpoint(&Checkpoint::load(p)?)?;
            if m.config != run.config.jepa_config() {
                return Err(CliError::Config("resume checkpoint was trained with a different config".into()));
            }
            m
        }
        None => JepaModel::new(run.config.jepa_config())?,
    };
    let subset = pipeline::jepa_subset(&data.samples, run.config.jepa.data_fraction, run.config.seed);
    let clips: Vec<TokenGrid> = subset.iter().map(|&i| data.grids[i].clone()).collect();
    let mut rows = Vec::new();
    pipeline::train_jepa(&run.config, &mut model, &clips, stop_after.unwrap_or(u64::MAX), |s, r| rows.push(JepaLossRow::new(s, r)))?;
    dir.write_csv(JEPA_LOSS, &rows)?;
    model.to_checkpoint()?.save(&dir.path(JEPA_CHECKPOINT))?;
    dir.seal()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderLossRow {
    pub stage: Stage,
    pub step: u64,
    pub loss: f64,
}

/// Stage-2 training on top of a frozen encoder; writes a model checkpoint
/// holding the encoder and decoder sections.
pub fn cmd_decode_tune(run: &Run, dataset: &Path, encoder: &EncoderSource) -> CliResult<Vec<DecoderLossRow>> {
    let data = Dataset::load(dataset, run.config.dataset.res, run.threads)?;
    let dir = run.dir()?;
    let jepa_config = run.config.jepa_config();
    let pair = encoder.load(jepa_config)?;
    let grids: Vec<&TokenGrid> = data.grids.iter().collect();
    let features = pipeline::token_features(&pair, &grids, run.threads)?;
    let samples: Vec<_> = data.samples.iter().collect();
    let examples = pipeline::decoder_examples(&samples, features);
    let mut rows = Vec::new();
    let f = pipeline::train_decoder(&run.config, &examples, pair.width(), |stage, r| {
        rows.push(DecoderLossRow { stage, step: r.step, loss: r.loss })
    })?;
    dir.write_csv(DECODER_LOSS, &rows)?;
    let mut ck = f.to_checkpoint()?;
    let encoder_config = match encoder {
        EncoderSource::Random => jepa_config,
        EncoderSource::Checkpoint(p) => stored_encoder_config(&Checkpoint::load(p)?)?,
    };
    pipeline::push_encoder(&mut ck, &encoder_config, &pair)?;
    ck.save(&dir.path(MODEL_CHECKPOINT))?;
    dir.seal()?;
    Ok(rows)
}

fn stored_encoder_config(ck: &Checkpoint) -> CliResult<uijepa_core::jepa::JepaConfig> {
    let key = if ck.get("encoder.config").is_some() { "encoder.config" } else { "jepa.config" };
    Ok(serde_json::from_str(ck.text(key)?)?)
}

/// Predict the configured splits with a trained model and score them.
pub fn cmd_eval(run: &Run, model: &Path, dataset: &Path, name: Option<&str>) -> CliResult<Vec<MetricsRow>> {
    let data = Dataset::load(dataset, run.config.dataset.res, run.threads)?;
    let dir = run.dir()?;
    let ck = Checkpoint::load(model)?;
    let pair = pipeline::encoder_from_checkpoint(&ck)?;
    let f = Finetuner::from_checkpoint(&ck)?;
    let name = name.map(str::to_string).unwrap_or_else(|| default_model_name(model));
    let (rows, predictions) = evaluate(run, &f, &pair, &data, &name)?;
    dir.write_csv(METRICS, &rows)?;
    dir.write_jsonl(PREDICTIONS, &predictions)?;
    dir.seal()?;
    Ok(rows)
}

/// The run directory holding the checkpoint names the model, falling back
/// to the file stem.
fn default_model_name(model: &Path) -> String {
    let dir = model.parent().and_then(Path::file_name).and_then(|n| n.to_str()).filter(|n| !n.is_empty());
    match dir {
        Some(d) => d.to_string(),
        None => EncoderSource::Checkpoint(model.to_path_buf()).label(),
    }
}

/// Predictions and metric rows for every configured split.
pub fn evaluate(
    run: &Run,
    f: &Finetuner,
    pair: &uijepa_core::jepa::EncoderPair<f32>,
    data: &Dataset,
    name: &str,
) -> CliResult<(Vec<MetricsRow>, Vec<Prediction>)> {
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for &split in &run.config.eval.splits {
        let idx = pipeline::limit(&data.indices(split), run.config.eval.max_samples);
        let grids: Vec<&TokenGrid> = idx.iter().map(|&i| &data.grids[i]).collect();
        let samples: Vec<_> = idx.iter().map(|&i| &data.samples[i]).collect();
        let examples = pipeline::decoder_examples(&samples, pipeline::token_features(pair, &grids, run.threads)?);
        let refs: Vec<_> = examples.iter().collect();
        let preds = pipeline::predict(f, &refs, run.config.decode_mode(), run.threads)?;
        rows.push(pipeline::score(&run.config, name, split, &preds));
        predictions.extend(preds);
    }
    Ok((rows, predictions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub encoder: String,
    pub split: Split,
    pub samples: usize,
    pub pearson: f64,
    pub spearman: f64,
    pub silhouette: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub sample_id: String,
    pub category: Category,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub method: String,
    pub encoders: Vec<(String, Vec<ProjectedPoint>)>,
}

/// Embedding analysis of one or more encoders over the same samples.
pub fn cmd_embed_analyze(run: &Run, dataset: &Path, encoders: &[EncoderSource]) -> CliResult<Vec<AnalysisRow>> {
    if encoders.is_empty() {
        return Err(CliError::Config("no encoder given".into()));
    }
    let data = Dataset::load(dataset, run.config.dataset.res, run.threads)?;
    let dir = run.dir()?;
    let split = run.config.eval.analysis_split;
    let mut rows = Vec::new();
    let mut projection = Projection {
        method: "pca (top two principal components; stands in for t-SNE)".into(),
        encoders: Vec::new(),
    };
    for (k, src) in encoders.iter().enumerate() {
        let pair = src.load(run.config.jepa_config())?;
        let (idx, a) = pipeline::analyze(&run.config, &pair, &data, split, run.threads)?;
        let mut label = src.label();
        if encoders[..k].iter().any(|e| e.label() == label) {
            label = format!("{label}#{k}");
        }
        rows.push(AnalysisRow {
            encoder: label.clone(),
            split,
            samples: idx.len(),
            pearson: a.pearson,
            spearman: a.spearman,
            silhouette: a.silhouette,
        });
        let points = idx
            .iter()
            .zip(&a.projection_2d)
            .map(|(&i, p)| ProjectedPoint {
                sample_id: data.samples[i].video_dir.clone(),
                category: data.samples[i].category,
                x: p[0],
                y: p[1],
            })
            .collect();
        projection.encoders.push((label, points));
    }
    dir.write_json(ANALYSIS, &rows)?;
    dir.write_json(PROJECTION, &projection)?;
    dir.seal()?;
    Ok(rows)
}
