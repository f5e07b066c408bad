use serde::{Deserialize, Serialize};

use super::fusion::ocr_filter;
use super::model::{dropout_rng, DecodeMode, DecoderConfig, FusionOptions, IntentDecoder};
use super::vocab::Vocab;
use crate::checkpoint::{Checkpoint, Record};
use crate::datagen::Split;
use crate::error::{Error, Result};
use crate::jepa::epoch_permutation;
use crate::nn::LoraConfig;
use crate::numerics::{Array, Graph, Optimizer, ParamStore, ScheduleState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One stage-2 sample: frozen-encoder token embeddings plus texts.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderExample {
    pub id: String,
    pub split: Split,
    /// `[tokens, encoder width]`.
    pub video: Array<f32>,
    pub ocr: Vec<String>,
    pub intent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub decoder: DecoderConfig,
    pub fusion: FusionOptions,
    pub lora: LoraConfig,
    /// Without adapters only the projection is trained.
    pub adapters_enabled: bool,
    /// Language-model warmup of the base decoder on intent text alone.
    pub lm_steps: u64,
    pub lm_batch: usize,
    pub lm_lr: f64,
    pub schedule: ScheduleState,
    pub batch_size: usize,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            decoder: DecoderConfig::default(),
            fusion: FusionOptions::default(),
            lora: LoraConfig::default(),
            adapters_enabled: true,
            lm_steps: 500,
            lm_batch: 16,
            lm_lr: 1e-3,
            schedule: ScheduleState::reference(3000, 150),
            batch_size: 1,
            max_new_tokens: 24,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    /// Warmup schedule of the base decoder: short linear warmup to `lm_lr`,
    /// cosine to 1% of it, light constant weight decay.
    pub fn lm_schedule(&self) -> ScheduleState {
        ScheduleState {
            step: 0,
            warmup_steps: (self.lm_steps / 20).max(1),
            total_steps: self.lm_steps.max(1),
            lr_start: self.lm_lr * 0.1,
            lr_peak: self.lm_lr,
            lr_final: self.lm_lr * 0.01,
            wd_start: 0.01,
            wd_final: 0.01,
            momentum_start: 1.0,
            momentum_final: 1.0,
            scale_factor: 1.0,
        }
    }
}

/// Vocabulary over training intents and their filtered OCR text.
pub fn build_vocab(examples: &[DecoderExample]) -> Vocab {
    let train = examples.iter().filter(|e| e.split == Split::Train);
    let ocr: Vec<String> = train.clone().flat_map(|e| ocr_filter(&e.ocr)).collect();
    Vocab::build(train.map(|e| e.intent.as_str()).chain(ocr.iter().map(String::as_str)))
}

/// Filtered OCR lines as one id sequence.
pub fn encode_ocr(vocab: &Vocab, lines: &[String]) -> Vec<usize> {
    ocr_filter(lines).iter().flat_map(|l| vocab.encode(l)).collect()
}

/// Loss of one optimisation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub loss: f64,
}

/// Decoder plus the state of its two training stages.
#[derive(Debug)]
pub struct Finetuner {
    pub config: FinetuneConfig,
    pub decoder: IntentDecoder<f32>,
    pub lm_schedule: ScheduleState,
    pub schedule: ScheduleState,
    lm_optimizer: Optimizer<f32>,
    optimizer: Optimizer<f32>,
}

impl Finetuner {
    pub fn new(config: FinetuneConfig, vocab: Vocab, video_width: usize) -> Result<Self> {
        if config.batch_size == 0 || config.lm_batch == 0 {
            return Err(Error::contract("batch sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut decoder = IntentDecoder::new(config.decoder, config.fusion, vocab, video_width, &mut rng)?;
        if config.adapters_enabled {
            decoder.attach_adapters(config.lora.clone(), &mut rng)?;
        }
        Ok(Finetuner {
            lm_schedule: config.lm_schedule(),
            schedule: config.schedule,
            config,
            decoder,
            lm_optimizer: Optimizer::adamw(),
            optimizer: Optimizer::adamw(),
        })
    }

    /// Pre-train the base decoder on `[SEP] intent [END]` sequences for the
    /// configured number of steps. Projection and adapters do not move.
    pub fn lm_warmup(&mut self, intents: &[String], mut on_step: impl FnMut(&StepReport)) -> Result<()> {
        if intents.is_empty() {
            return Err(Error::contract("no intents for the language-model warmup"));
        }
        let seqs = intents
            .iter()
            .map(|t| self.decoder.fuse(0, None, &self.decoder.vocab.encode(t)))
            .collect::<Result<Vec<_>>>()?;
        let d = &mut self.decoder;
        d.base.set_trainable(true);
        while self.lm_schedule.step < self.config.lm_steps {
            let step = self.lm_schedule.step;
            let b = self.config.lm_batch;
            d.base.zero_grad();
            let mut total = 0.0;
            for j in 0..b {
                let pos = step * b as u64 + j as u64;
                let epoch = pos / seqs.len() as u64;
                let i = epoch_permutation(self.config.seed ^ 0x4C4D, epoch, seqs.len())[(pos % seqs.len() as u64) as usize];
                let mut g = Graph::new();
                let stores = crate::decoder::Stores { base: &d.base, projection: &d.projection, adapters: None };
                let loss = d.loss(stores, &mut g, true, false, None, &seqs[i], None)?;
                let v = g.value(loss).item() as f64;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("language-model loss at step {step}")));
                }
                total += v;
                let grads = g.backward(loss)?;
                d.base.accumulate(&grads, 1.0 / b as f32);
            }
            self.lm_optimizer.step_scheduled(&mut [&mut d.base], &mut self.lm_schedule)?;
            on_step(&StepReport { step, loss: total / b as f64 });
        }
        Ok(())
    }

    /// Freeze the base decoder: only the projection and adapters train.
    fn freeze_base(&mut self) {
        self.decoder.base.set_trainable(false);
        self.decoder.projection.set_trainable(true);
        self.decoder.adapters.set_trainable(true);
    }

    /// Loss of one example under the current parameters, no dropout.
    pub fn example_loss(&self, ex: &DecoderExample) -> Result<f64> {
        let d = &self.decoder;
        let ocr = encode_ocr(&d.vocab, &ex.ocr);
        let seq = d.fuse(ex.video.rows(), Some(&ocr), &d.vocab.encode(&ex.intent))?;
        let mut g = Graph::new();
        let loss = d.loss(d.stores(), &mut g, false, false, Some(&ex.video), &seq, None)?;
        Ok(g.value(loss).item() as f64)
    }

    /// One stage-2 update over `batch`. Gradients are averaged over the
    /// batch; a non-finite loss aborts before any parameter changes.
    pub fn train_step(&mut self, batch: &[&DecoderExample]) -> Result<StepReport> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        self.freeze_base();
        let step = self.schedule.step;
        let d = &mut self.decoder;
        d.projection.zero_grad();
        d.adapters.zero_grad();
        let mut rng = dropout_rng(self.config.seed, step);
        let mut total = 0.0;
        for ex in batch {
            let ocr = encode_ocr(&d.vocab, &ex.ocr);
            let seq = d.fuse(ex.video.rows(), Some(&ocr), &d.vocab.encode(&ex.intent))?;
            let mut g = Graph::new();
            let loss = d.loss(d.stores(), &mut g, true, true, Some(&ex.video), &seq, Some(&mut rng))?;
            let v = g.value(loss).item() as f64;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("decoder loss at step {step}")));
            }
            total += v;
            let grads = g.backward(loss)?;
            let scale = 1.0 / batch.len() as f32;
            d.projection.accumulate(&grads, scale);
            d.adapters.accumulate(&grads, scale);
        }
        self.optimizer.step_scheduled(&mut [&mut d.projection, &mut d.adapters], &mut self.schedule)?;
        Ok(StepReport { step, loss: total / batch.len() as f64 })
    }

    /// Stage-2 training on `data` until `until_step`, batches drawn from a
    /// seeded per-epoch permutation.
    pub fn train(
        &mut self,
        data: &[DecoderExample],
        until_step: u64,
        mut on_step: impl FnMut(&StepReport),
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::contract("no training examples"));
        }
        let n = data.len() as u64;
        while self.schedule.step < until_step {
            let b = self.config.batch_size as u64;
            let batch: Vec<&DecoderExample> = (0..b)
                .map(|j| {
                    let pos = self.schedule.step * b + j;
                    &data[epoch_permutation(self.config.seed, pos / n, data.len())[(pos % n) as usize]]
                })
                .collect();
            let r = self.train_step(&batch)?;
            on_step(&r);
        }
        Ok(())
    }

    pub fn predict(&self, ex: &DecoderExample, mode: DecodeMode) -> Result<Prediction> {
        let d = &self.decoder;
        let ocr = encode_ocr(&d.vocab, &ex.ocr);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let (prediction, _) = d.generate(&ex.video, Some(&ocr), mode, self.config.max_new_tokens, &mut rng)?;
        Ok(Prediction {
            sample_id: ex.id.clone(),
            split: ex.split,
            prediction,
            reference: ex.intent.clone(),
            ocr_used: d.options.ocr_enabled && !ocr.is_empty(),
        })
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let d = &self.decoder;
        let mut ck = Checkpoint::new();
        ck.push("decoder.config", Record::Text(serde_json::to_string(&self.config)?))?;
        ck.push("decoder.vocab", Record::Text(serde_json::to_string(&d.vocab)?))?;
        ck.push("decoder.video_width", Record::U64(d.video_width as u64))?;
        ck.push("decoder.lm_schedule", Record::Text(serde_json::to_string(&self.lm_schedule)?))?;
        ck.push("decoder.schedule", Record::Text(serde_json::to_string(&self.schedule)?))?;
        ck.push_store("decoder.base/", &d.base)?;
        ck.push_store("decoder.projection/", &d.projection)?;
        ck.push_store("decoder.adapters/", &d.adapters)?;
        Ok(ck)
    }

    /// Rebuild from a checkpoint. Optimizer moments are not stored, so a
    /// restored finetuner is meant for inference or a fresh stage.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: FinetuneConfig = serde_json::from_str(ck.text("decoder.config")?)?;
        let vocab: Vocab = serde_json::from_str(ck.text("decoder.vocab")?)?;
        let width = ck.u64("decoder.video_width")? as usize;
        let mut f = Finetuner::new(config, vocab, width)?;
        f.lm_schedule = serde_json::from_str(ck.text("decoder.lm_schedule")?)?;
        f.schedule = serde_json::from_str(ck.text("decoder.schedule")?)?;
        let d = &mut f.decoder;
        ck.load_store("decoder.base/", &mut d.base)?;
        ck.load_store("decoder.projection/", &mut d.projection)?;
        ck.load_store("decoder.adapters/", &mut d.adapters)?;
        Ok(f)
    }

    /// Names of parameters in the stage-2 trainable set.
    pub fn trainable_names(&self) -> Vec<String> {
        let d = &self.decoder;
        let names = |s: &ParamStore<f32>, prefix: &str| s.iter().map(|p| format!("{prefix}{}", p.name())).collect::<Vec<_>>();
        let mut out = names(&d.projection, "projection/");
        out.extend(names(&d.adapters, "adapters/"));
        out
    }
}

/// One predictions JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub split: Split,
    pub prediction: String,
    pub reference: String,
    pub ocr_used: bool,
}
