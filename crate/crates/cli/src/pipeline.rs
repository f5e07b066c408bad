//! In-memory stages shared by the commands and the sweep runner.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uijepa_core::checkpoint::{Checkpoint, Record};
use uijepa_core::datagen::{read_manifest, Category, IntentSample, Split, MANIFEST};
use uijepa_core::decoder::{build_vocab, DecodeMode, DecoderExample, Finetuner, Prediction, StepReport};
use uijepa_core::jepa::{EncoderPair, JepaConfig, JepaLossReport, JepaModel};
use uijepa_core::masking::MaskSet;
use uijepa_core::metrics::{EmbeddingAnalysis, HashedEmbedder, ScoreReport};
use uijepa_core::numerics::{Array, ParamStore};
use uijepa_core::video::{detokenize, ingest_dir, tubelet_tokenize, TokenGrid, NUM_FRAMES};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const SUBSET_SALT: u64 = 0x5e_ed0f_da7a;
const AUGMENT_SALT: u64 = 0xa06_3e47;

/// Map `f` over `items` on up to `threads` scoped threads, keeping order.
pub fn par_map<T: Sync, U: Send>(
    items: &[T],
    threads: usize,
    f: impl Fn(&T) -> CliResult<U> + Sync,
) -> CliResult<Vec<U>> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<CliResult<Vec<U>>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<CliResult<Vec<U>>>())).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Manifest plus the tokenized clip of every sample.
#[derive(Debug)]
pub struct Dataset {
    pub samples: Vec<IntentSample>,
    pub grids: Vec<TokenGrid>,
}

impl Dataset {
    pub fn load(root: &Path, res: usize, threads: usize) -> CliResult<Self> {
        let samples = read_manifest(&root.join(MANIFEST))?;
        if samples.is_empty() {
            return Err(CliError::Data(format!("{} lists no samples", root.join(MANIFEST).display())));
        }
        let grids = par_map(&samples, threads, |s| Ok(ingest_dir(&s.dir(root), res)?))?;
        Ok(Dataset { samples, grids })
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.samples[i].split == split).collect()
    }
}

/// Training clips kept for JEPA tuning: per category, a seeded shuffle of
/// its training samples truncated to `ceil(fraction * n)` (at least one).
/// Returned in manifest order.
pub fn jepa_subset(samples: &[IntentSample], fraction: f64, seed: u64) -> Vec<usize> {
    let mut out = Vec::new();
    for c in Category::ALL {
        let mut idx: Vec<usize> =
            (0..samples.len()).filter(|&i| samples[i].split == Split::Train && samples[i].category == c).collect();
        if idx.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SUBSET_SALT);
        rng.set_stream(c.index() as u64);
        idx.shuffle(&mut rng);
        let keep = ((fraction * idx.len() as f64 - 1e-9).ceil() as usize).clamp(1, idx.len());
        out.extend_from_slice(&idx[..keep]);
    }
    out.sort_unstable();
    out
}

/// Train `model` up to step `until` (capped at `config.jepa.iterations`).
/// With augmentation on, each stream position gets its own flip/crop draw,
/// so runs stay resumable.
pub fn train_jepa(
    config: &RunConfig,
    model: &mut JepaModel<f32>,
    clips: &[TokenGrid],
    until: u64,
    mut on_step: impl FnMut(u64, &JepaLossReport),
) -> CliResult<()> {
    let until = until.min(config.jepa.iterations);
    let aug = config.jepa.augmentation;
    if aug.is_none() {
        return Ok(model.train(clips, until, on_step)?);
    }
    if clips.is_empty() {
        return Err(CliError::Data("no training clips".into()));
    }
    let b = model.config.batch_size as u64;
    while model.step() < until {
        let step = model.step();
        let idx = model.batch_indices(step, clips.len());
        let mut grids = Vec::with_capacity(idx.len());
        for (j, &i) in idx.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ AUGMENT_SALT);
            rng.set_stream(step * b + j as u64);
            let stack = detokenize(&clips[i], "", NUM_FRAMES)?;
            grids.push(tubelet_tokenize(&aug.apply(&stack, &mut rng)?)?);
        }
        let masks = grids.iter().enumerate().map(|(j, g)| model.masks_for(step, j, g)).collect::<Result<Vec<_>, _>>()?;
        let batch: Vec<(&TokenGrid, &MaskSet)> = grids.iter().zip(&masks).collect();
        let report = model.train_step(&batch)?;
        on_step(step, &report);
    }
    Ok(())
}

/// Where the frozen encoder of a decoder run comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSource {
    /// The untrained initialisation a JEPA run with the same config starts from.
    Random,
    Checkpoint(std::path::PathBuf),
}

impl EncoderSource {
    pub fn parse(s: &str) -> Self {
        if s == "random" {
            EncoderSource::Random
        } else {
            EncoderSource::Checkpoint(s.into())
        }
    }

    pub fn label(&self) -> String {
        match self {
            EncoderSource::Random => "random".into(),
            EncoderSource::Checkpoint(p) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into()),
        }
    }

    pub fn load(&self, jepa: JepaConfig) -> CliResult<EncoderPair<f32>> {
        match self {
            EncoderSource::Random => Ok(JepaModel::<f32>::new(jepa)?.pair),
            EncoderSource::Checkpoint(p) => encoder_from_checkpoint(&Checkpoint::load(p)?),
        }
    }
}

/// Context encoder from a JEPA checkpoint or from the encoder section of a
/// model checkpoint.
pub fn encoder_from_checkpoint(ck: &Checkpoint) -> CliResult<EncoderPair<f32>> {
    let (config_key, prefix) = if ck.get("encoder.config").is_some() {
        ("encoder.config", "encoder.context/")
    } else {
        ("jepa.config", "jepa.context/")
    };
    let config: JepaConfig = serde_json::from_str(ck.text(config_key)?)?;
    let mut pair = JepaModel::<f32>::new(config)?.pair;
    ck.load_store(prefix, &mut pair.context)?;
    Ok(pair)
}

/// Encoder section written into model checkpoints.
pub fn push_encoder(ck: &mut Checkpoint, config: &JepaConfig, pair: &EncoderPair<f32>) -> CliResult<()> {
    ck.push("encoder.config", Record::Text(serde_json::to_string(config)?))?;
    ck.push_store("encoder.context/", &pair.context)?;
    Ok(())
}

/// Frozen-encoder token embeddings (`[tokens, width]`) of the full grid.
pub fn token_features(pair: &EncoderPair<f32>, grids: &[&TokenGrid], threads: usize) -> CliResult<Vec<Array<f32>>> {
    par_map(grids, threads, |g| Ok(pair.encode_context(g, &[])?))
}

/// Mean-pooled clip embeddings.
pub fn pooled_features(pair: &EncoderPair<f32>, grids: &[&TokenGrid], threads: usize) -> CliResult<Vec<Vec<f64>>> {
    par_map(grids, threads, |g| Ok(pair.embed_video(g)?.into_iter().map(f64::from).collect()))
}

pub fn decoder_examples(samples: &[&IntentSample], features: Vec<Array<f32>>) -> Vec<DecoderExample> {
    samples
        .iter()
        .zip(features)
        .map(|(s, video)| DecoderExample {
            id: s.video_dir.clone(),
            split: s.split,
            video,
            ocr: s.ocr_final_frame.clone(),
            intent: s.intent.clone(),
        })
        .collect()
}

/// Which training stage a decoder loss row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LmWarmup,
    Finetune,
}

/// Language-model warmup on training intents, then stage-2 training on the
/// training split. Fails if any frozen base parameter moved in stage 2.
pub fn train_decoder(
    config: &RunConfig,
    examples: &[DecoderExample],
    video_width: usize,
    mut on_step: impl FnMut(Stage, &StepReport),
) -> CliResult<Finetuner> {
    let train: Vec<DecoderExample> = examples.iter().filter(|e| e.split == Split::Train).cloned().collect();
    if train.is_empty() {
        return Err(CliError::Data("no training samples for the decoder".into()));
    }
    let mut f = Finetuner::new(config.finetune_config(), build_vocab(examples), video_width)?;
    let intents: Vec<String> = train.iter().map(|e| e.intent.clone()).collect();
    f.lm_warmup(&intents, |r| on_step(Stage::LmWarmup, r))?;
    let base = f.decoder.base.snapshot();
    f.train(&train, config.decoder.iterations, |r| on_step(Stage::Finetune, r))?;
    if !same_values(&f.decoder.base, &base) {
        return Err(CliError::Internal("frozen decoder parameters changed during stage 2".into()));
    }
    Ok(f)
}

fn same_values(store: &ParamStore<f32>, snapshot: &[Array<f32>]) -> bool {
    store.iter().zip(snapshot).all(|(p, s)| p.value().data() == s.data())
}

/// Evenly spaced subset of at most `max` items (all when `max` is 0).
pub fn limit<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    if max == 0 || items.len() <= max {
        return items.to_vec();
    }
    (0..max).map(|k| items[k * items.len() / max].clone()).collect()
}

pub fn predict(f: &Finetuner, examples: &[&DecoderExample], mode: DecodeMode, threads: usize) -> CliResult<Vec<Prediction>> {
    par_map(examples, threads, |e| Ok(f.predict(e, mode)?))
}

/// One metrics CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub split: Split,
    #[serde(rename = "SBERT")]
    pub sbert: f64,
    #[serde(rename = "ROUGE-1")]
    pub rouge1: f64,
    #[serde(rename = "ROUGE-2")]
    pub rouge2: f64,
    #[serde(rename = "ROUGE-L")]
    pub rouge_l: f64,
    #[serde(rename = "IntentSim")]
    pub intent_sim: f64,
}

pub fn score(config: &RunConfig, model: &str, split: Split, predictions: &[Prediction]) -> MetricsRow {
    let embedder = HashedEmbedder { dims: config.eval.embedder_dims };
    let pairs = predictions.iter().filter(|p| p.split == split).map(|p| (p.prediction.as_str(), p.reference.as_str()));
    let r = ScoreReport::compute(pairs, &embedder, config.eval.cosine_norm);
    MetricsRow {
        model: model.to_string(),
        split,
        sbert: r.sbert_like,
        rouge1: r.rouge1,
        rouge2: r.rouge2,
        rouge_l: r.rouge_l,
        intent_sim: r.intent_sim,
    }
}

/// Embedding diagnostics of `pair` over the samples of `split`.
pub fn analyze(
    config: &RunConfig,
    pair: &EncoderPair<f32>,
    data: &Dataset,
    split: Split,
    threads: usize,
) -> CliResult<(Vec<usize>, EmbeddingAnalysis)> {
    let idx = data.indices(split);
    let grids: Vec<&TokenGrid> = idx.iter().map(|&i| &data.grids[i]).collect();
    let emb = pooled_features(pair, &grids, threads)?;
    let labels: Vec<Category> = idx.iter().map(|&i| data.samples[i].category).collect();
    let intents: Vec<String> = idx.iter().map(|&i| data.samples[i].intent.clone()).collect();
    let embedder = HashedEmbedder { dims: config.eval.embedder_dims };
    Ok((idx, EmbeddingAnalysis::compute(&emb, &labels, &intents, &embedder)?))
}
