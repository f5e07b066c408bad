//! Run configuration: one TOML file with `seed` and four sections.

use serde::{Deserialize, Serialize};
use uijepa_core::datagen::{Category, DatasetConfig, Split};
use uijepa_core::decoder::{DecodeMode, DecoderConfig, FinetuneConfig, FusionOptions};
use uijepa_core::jepa::{EncoderConfig, GroupReduction, JepaConfig, PredictorConfig};
use uijepa_core::masking::{BlockMaskConfig, MaskSetting, MaskingConfig, TemporalMaskConfig, TemporalMode};
use uijepa_core::metrics::CosineNorm;
use uijepa_core::nn::{AdapterTarget, LoraConfig};
use uijepa_core::numerics::ScheduleState;
use uijepa_core::video::{Augmentation, TOKEN_DIM};

use crate::error::{CliError, CliResult};

pub const DATA_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub jepa: JepaSection,
    pub decoder: DecoderSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub categories: Vec<Category>,
    pub per_category: usize,
    pub zero_shot: Vec<Category>,
    pub zero_shot_per_category: usize,
    pub few_shot_fraction: f64,
    pub res: usize,
    pub max_noise_steps: usize,
    pub delexicalize: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        DatasetSection {
            categories: d.categories,
            per_category: d.per_category,
            zero_shot: d.zero_shot,
            zero_shot_per_category: d.zero_shot_per_category,
            few_shot_fraction: d.few_shot_fraction,
            res: d.res,
            max_noise_steps: d.max_noise_steps,
            delexicalize: d.delexicalize,
        }
    }
}

/// Learning-rate, weight-decay and momentum schedule keys shared by both
/// training stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub warmup: u64,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_final: f64,
    pub wd_start: f64,
    pub wd_final: f64,
    pub momentum_start: f64,
    pub momentum_final: f64,
    pub scale_factor: f64,
}

impl ScheduleSection {
    fn reference(warmup: u64) -> Self {
        let r = ScheduleState::reference(1, warmup);
        ScheduleSection {
            warmup,
            lr_start: r.lr_start,
            lr_peak: r.lr_peak,
            lr_final: r.lr_final,
            wd_start: r.wd_start,
            wd_final: r.wd_final,
            momentum_start: r.momentum_start,
            momentum_final: r.momentum_final,
            scale_factor: r.scale_factor,
        }
    }

    pub fn state(&self, total_steps: u64) -> ScheduleState {
        ScheduleState {
            step: 0,
            warmup_steps: self.warmup,
            total_steps,
            lr_start: self.lr_start,
            lr_peak: self.lr_peak,
            lr_final: self.lr_final,
            wd_start: self.wd_start,
            wd_final: self.wd_final,
            momentum_start: self.momentum_start,
            momentum_final: self.momentum_final,
            scale_factor: self.scale_factor,
        }
    }
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection::reference(50)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JepaSection {
    pub encoder: EncoderConfig,
    pub predictor: PredictorConfig,
    pub mask_setting: MaskSetting,
    pub temporal_mode: TemporalMode,
    /// Masked hyper-frames per temporal mask.
    pub temporal_k: usize,
    pub short_range: BlockMaskConfig,
    pub long_range: BlockMaskConfig,
    pub iterations: u64,
    pub batch_size: usize,
    pub group_reduction: GroupReduction,
    pub schedule: ScheduleSection,
    /// Share of each category's training clips used for tuning.
    pub data_fraction: f64,
    /// Random flip / crop of training clips; off by default.
    pub augmentation: Augmentation,
}

impl Default for JepaSection {
    fn default() -> Self {
        let j = JepaConfig::default();
        JepaSection {
            encoder: j.encoder,
            predictor: j.predictor,
            mask_setting: j.masking.setting,
            temporal_mode: j.masking.temporal.mode,
            temporal_k: j.masking.temporal.masked_hyperframes,
            short_range: j.masking.short,
            long_range: j.masking.long,
            iterations: j.schedule.total_steps,
            batch_size: j.batch_size,
            group_reduction: j.group_reduction,
            schedule: ScheduleSection::reference(j.schedule.warmup_steps),
            data_fraction: 1.0,
            augmentation: Augmentation::NONE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSection {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
    pub max_seq_len: usize,
    pub adapters: bool,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    pub lora_dropout: f64,
    pub lora_targets: Vec<AdapterTarget>,
    pub ocr_enabled: bool,
    /// Add decoder position embeddings to the video slots.
    pub video_positions: bool,
    pub loss_on_end: bool,
    pub lm_steps: u64,
    pub lm_batch: usize,
    pub lm_lr: f64,
    pub iterations: u64,
    pub batch_size: usize,
    pub schedule: ScheduleSection,
    pub max_new_tokens: usize,
}

impl Default for DecoderSection {
    fn default() -> Self {
        let f = FinetuneConfig::default();
        DecoderSection {
            depth: f.decoder.depth,
            width: f.decoder.width,
            heads: f.decoder.heads,
            mlp_ratio: f.decoder.mlp_ratio,
            max_seq_len: f.decoder.max_seq_len,
            adapters: f.adapters_enabled,
            lora_rank: f.lora.rank,
            lora_alpha: f.lora.alpha,
            lora_dropout: f.lora.dropout,
            lora_targets: f.lora.targets,
            ocr_enabled: f.fusion.ocr_enabled,
            video_positions: f.fusion.video_positions,
            loss_on_end: f.fusion.loss_on_end,
            lm_steps: f.lm_steps,
            lm_batch: f.lm_batch,
            lm_lr: f.lm_lr,
            iterations: f.schedule.total_steps,
            batch_size: f.batch_size,
            schedule: ScheduleSection::reference(f.schedule.warmup_steps),
            max_new_tokens: f.max_new_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeKind {
    Greedy,
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub splits: Vec<Split>,
    pub decode: DecodeKind,
    pub temperature: f64,
    pub cosine_norm: CosineNorm,
    pub embedder_dims: usize,
    /// Split used for embedding analysis.
    pub analysis_split: Split,
    /// Evaluate at most this many samples per split (0 = all).
    pub max_samples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            splits: vec![Split::FewShotEval, Split::ZeroShotEval],
            decode: DecodeKind::Greedy,
            temperature: 1.0,
            cosine_norm: CosineNorm::ShiftScale,
            embedder_dims: 512,
            analysis_split: Split::FewShotEval,
            max_samples: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.dataset_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let j = &self.jepa;
        if !(j.data_fraction > 0.0 && j.data_fraction <= 1.0) {
            return bad(format!("jepa.data_fraction {} outside (0, 1]", j.data_fraction));
        }
        if j.batch_size == 0 || self.decoder.batch_size == 0 || self.decoder.lm_batch == 0 {
            return bad("batch sizes must be positive".into());
        }
        if j.encoder.heads == 0 || j.encoder.width % j.encoder.heads != 0 {
            return bad(format!("encoder width {} not divisible by {} heads", j.encoder.width, j.encoder.heads));
        }
        if j.predictor.heads == 0 || j.predictor.width % j.predictor.heads != 0 {
            return bad(format!("predictor width {} not divisible by {} heads", j.predictor.width, j.predictor.heads));
        }
        let d = &self.decoder;
        if d.heads == 0 || d.width % d.heads != 0 {
            return bad(format!("decoder width {} not divisible by {} heads", d.width, d.heads));
        }
        if d.adapters && d.lora_rank == 0 {
            return bad("lora_rank must be positive when adapters are enabled".into());
        }
        if self.eval.splits.is_empty() {
            return bad("eval.splits is empty".into());
        }
        if self.eval.embedder_dims == 0 {
            return bad("eval.embedder_dims must be positive".into());
        }
        if self.eval.decode == DecodeKind::Temperature && (self.eval.temperature.is_nan() || self.eval.temperature < 0.0) {
            return bad("eval.temperature must be non-negative".into());
        }
        Ok(())
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        let d = &self.dataset;
        DatasetConfig {
            categories: d.categories.clone(),
            per_category: d.per_category,
            zero_shot: d.zero_shot.clone(),
            zero_shot_per_category: d.zero_shot_per_category,
            few_shot_fraction: d.few_shot_fraction,
            res: d.res,
            max_noise_steps: d.max_noise_steps,
            delexicalize: d.delexicalize,
            seed: self.seed,
        }
    }

    pub fn jepa_config(&self) -> JepaConfig {
        let j = &self.jepa;
        JepaConfig {
            encoder: j.encoder,
            predictor: j.predictor,
            masking: MaskingConfig {
                setting: j.mask_setting,
                short: j.short_range,
                long: j.long_range,
                temporal: TemporalMaskConfig { mode: j.temporal_mode, masked_hyperframes: j.temporal_k },
            },
            batch_size: j.batch_size,
            group_reduction: j.group_reduction,
            schedule: j.schedule.state(j.iterations),
            in_dim: TOKEN_DIM,
            seed: self.seed,
        }
    }

    pub fn finetune_config(&self) -> FinetuneConfig {
        let d = &self.decoder;
        FinetuneConfig {
            decoder: DecoderConfig {
                depth: d.depth,
                width: d.width,
                heads: d.heads,
                mlp_ratio: d.mlp_ratio,
                max_seq_len: d.max_seq_len,
            },
            fusion: FusionOptions {
                ocr_enabled: d.ocr_enabled,
                video_positions: d.video_positions,
                loss_on_end: d.loss_on_end,
            },
            lora: LoraConfig { rank: d.lora_rank, alpha: d.lora_alpha, dropout: d.lora_dropout, targets: d.lora_targets.clone() },
            adapters_enabled: d.adapters,
            lm_steps: d.lm_steps,
            lm_batch: d.lm_batch,
            lm_lr: d.lm_lr,
            schedule: d.schedule.state(d.iterations),
            batch_size: d.batch_size,
            max_new_tokens: d.max_new_tokens,
            seed: self.seed,
        }
    }

    pub fn decode_mode(&self) -> DecodeMode {
        match self.eval.decode {
            DecodeKind::Greedy => DecodeMode::Greedy,
            DecodeKind::Temperature => DecodeMode::Temperature(self.eval.temperature),
        }
    }
}
