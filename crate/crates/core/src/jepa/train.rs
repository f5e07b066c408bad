use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{
    embedding_std, jepa_loss, unmasked_indices, EncoderConfig, EncoderPair, GroupPrediction, GroupReduction,
    JepaLossReport, Predictor, PredictorConfig,
};
use crate::checkpoint::{Checkpoint, Record};
use crate::error::{Error, Result};
use crate::masking::{build_mask_set, sample_seed, MaskSet, MaskingConfig};
use crate::numerics::{Array, Graph, Moments, Optimizer, ParamStore, Scalar, ScheduleState};
use crate::video::{Coord, TokenGrid, TOKEN_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JepaConfig {
    pub encoder: EncoderConfig,
    pub predictor: PredictorConfig,
    pub masking: MaskingConfig,
    pub batch_size: usize,
    pub group_reduction: GroupReduction,
    pub schedule: ScheduleState,
    pub in_dim: usize,
    pub seed: u64,
}

impl Default for JepaConfig {
    fn default() -> Self {
        JepaConfig {
            encoder: EncoderConfig::default(),
            predictor: PredictorConfig::default(),
            masking: MaskingConfig::default(),
            batch_size: 4,
            group_reduction: GroupReduction::Mean,
            schedule: ScheduleState::reference(2000, 50),
            in_dim: TOKEN_DIM,
            seed: 0,
        }
    }
}

/// Everything trained in the JEPA stage.
#[derive(Debug)]
pub struct JepaModel<T> {
    pub config: JepaConfig,
    pub pair: EncoderPair<T>,
    pub predictor: Predictor<T>,
    pub optimizer: Optimizer<T>,
}

/// Loss graph pieces for one sample.
struct SampleLoss {
    per_group: BTreeMap<String, f64>,
    embedding_std: f64,
    skipped: usize,
}

impl<T: Scalar> JepaModel<T> {
    pub fn new(config: JepaConfig) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::contract("batch size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut schedule = config.schedule;
        schedule.step = 0;
        let pair = EncoderPair::new(config.encoder, config.in_dim, schedule, &mut rng)?;
        let predictor = Predictor::new(config.predictor, config.encoder.width, &mut rng)?;
        Ok(JepaModel { config, pair, predictor, optimizer: Optimizer::adamw() })
    }

    pub fn step(&self) -> u64 {
        self.pair.momentum_state.step
    }

    /// Masks for the `j`-th sample of the batch at `step`, seeded from the
    /// position of that sample in the training stream.
    pub fn masks_for(&self, step: u64, j: usize, grid: &TokenGrid) -> Result<MaskSet> {
        let index = step * self.config.batch_size as u64 + j as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(self.config.seed, index));
        build_mask_set(&self.config.masking, grid.dims, &mut rng)
    }

    /// Build the loss for one sample on `g`; returns `None` when every group
    /// was skipped.
    fn sample_loss(
        &self,
        g: &mut Graph<T>,
        grid: &TokenGrid,
        masks: &MaskSet,
    ) -> Result<Option<(crate::numerics::Var, SampleLoss)>> {
        let tokens: Array<T> = grid.tokens_as();
        let targets = self.pair.encode_target_tokens(&tokens, &grid.coords)?;
        let n = grid.len();
        let mut preds = Vec::new();
        let mut stds = Vec::new();
        let mut skipped = 0;
        for group in &masks.groups {
            if group.indices.is_empty() || group.indices.len() >= n {
                skipped += 1;
                continue;
            }
            let keep = unmasked_indices(n, &group.indices)?;
            let mut ctx = crate::nn::Ctx::new(&self.pair.context, true);
            let enc = self.pair.encoder.forward(&mut ctx, g, &tokens, &grid.coords, &keep)?;
            stds.push(embedding_std(g.value(enc)));
            let kc: Vec<Coord> = keep.iter().map(|&i| grid.coords[i]).collect();
            let mc: Vec<Coord> = group.indices.iter().map(|&i| grid.coords[i]).collect();
            let pred = self.predictor.forward(g, true, enc, &kc, &mc)?;
            preds.push(GroupPrediction { name: group.name, indices: &group.indices, pred });
        }
        if preds.is_empty() {
            return Ok(None);
        }
        let (loss, per_group) = jepa_loss(g, &targets, &preds, self.config.group_reduction)?;
        let embedding_std = stds.iter().sum::<f64>() / stds.len() as f64;
        Ok(Some((loss, SampleLoss { per_group, embedding_std, skipped })))
    }

    /// Forward-only loss report for one sample.
    pub fn evaluate(&self, grid: &TokenGrid, masks: &MaskSet) -> Result<JepaLossReport> {
        let mut g = Graph::new();
        let (loss, s) = self
            .sample_loss(&mut g, grid, masks)?
            .ok_or_else(|| Error::contract("every mask group was empty or full"))?;
        Ok(JepaLossReport {
            per_group_loss: s.per_group,
            total: g.value(loss).item().to_f64(),
            embedding_std: s.embedding_std,
            skipped_groups: s.skipped,
        })
    }

    /// One optimizer step on the context encoder and predictor from the
    /// averaged per-sample gradients, then the EMA update of the target.
    pub fn train_step(&mut self, batch: &[(&TokenGrid, &MaskSet)]) -> Result<JepaLossReport> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        self.pair.context.zero_grad();
        self.predictor.params.zero_grad();
        let scale = T::of(1.0 / batch.len() as f64);
        let mut totals = Vec::new();
        let mut per_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut stds = Vec::new();
        let mut skipped = 0;
        for (grid, masks) in batch {
            let mut g = Graph::new();
            let Some((loss, s)) = self.sample_loss(&mut g, grid, masks)? else {
                skipped += masks.groups.len();
                continue;
            };
            let value = g.value(loss).item().to_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("JEPA loss at step {}", self.step())));
            }
            let grads = g.backward(loss)?;
            self.pair.context.accumulate(&grads, scale);
            self.predictor.params.accumulate(&grads, scale);
            totals.push(value);
            for (k, v) in s.per_group {
                per_group.entry(k).or_default().push(v);
            }
            stds.push(s.embedding_std);
            skipped += s.skipped;
        }
        if totals.is_empty() {
            return Err(Error::contract("every mask group in the batch was empty or full"));
        }
        let sched = self.pair.momentum_state;
        self.optimizer
            .step(&mut [&mut self.pair.context, &mut self.predictor.params], sched.lr(), sched.weight_decay())?;
        self.pair.ema_update(sched.momentum())?;
        self.pair.momentum_state.advance();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(JepaLossReport {
            per_group_loss: per_group.iter().map(|(k, v)| (k.clone(), mean(v))).collect(),
            total: mean(&totals),
            embedding_std: mean(&stds),
            skipped_groups: skipped,
        })
    }

    /// Dataset indices for `step`: the training stream walks a fresh seeded
    /// permutation of the data each epoch.
    pub fn batch_indices(&self, step: u64, data_len: usize) -> Vec<usize> {
        let b = self.config.batch_size as u64;
        let n = data_len as u64;
        let mut cached: Option<(u64, Vec<usize>)> = None;
        (0..b)
            .map(|j| {
                let pos = step * b + j;
                let epoch = pos / n;
                if cached.as_ref().map(|c| c.0) != Some(epoch) {
                    cached = Some((epoch, epoch_permutation(self.config.seed, epoch, data_len)));
                }
                cached.as_ref().unwrap().1[(pos % n) as usize]
            })
            .collect()
    }

    /// Train until the schedule reaches `until_step`, calling `on_step`
    /// after every step with the step index and its report.
    pub fn train(
        &mut self,
        data: &[TokenGrid],
        until_step: u64,
        mut on_step: impl FnMut(u64, &JepaLossReport),
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::contract("no training clips"));
        }
        while self.step() < until_step {
            let step = self.step();
            let idx = self.batch_indices(step, data.len());
            let masks = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| self.masks_for(step, j, &data[i]))
                .collect::<Result<Vec<_>>>()?;
            let batch: Vec<(&TokenGrid, &MaskSet)> = idx.iter().map(|&i| &data[i]).zip(&masks).collect();
            let report = self.train_step(&batch)?;
            on_step(step, &report);
        }
        Ok(())
    }
}

pub fn epoch_permutation(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

const STORES: [&str; 2] = ["context", "predictor"];

impl JepaModel<f32> {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new();
        ck.push("jepa.config", Record::Text(serde_json::to_string(&self.config)?))?;
        ck.push("jepa.schedule", Record::Text(serde_json::to_string(&self.pair.momentum_state)?))?;
        ck.push_store("jepa.context/", &self.pair.context)?;
        ck.push_store("jepa.target/", &self.pair.target)?;
        ck.push_store("jepa.predictor/", &self.predictor.params)?;
        ck.push("jepa.optim.steps", Record::U64(self.optimizer.steps))?;
        let stores = [&self.pair.context, &self.predictor.params];
        for (s, moments) in self.optimizer.moments().iter().enumerate() {
            for (p, m) in stores[s].iter().zip(moments) {
                let base = format!("{}/{}", STORES[s], p.name());
                ck.push(format!("jepa.optim.first/{base}"), Record::Tensor(m.first.clone()))?;
                ck.push(format!("jepa.optim.second/{base}"), Record::Tensor(m.second.clone()))?;
            }
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: JepaConfig = serde_json::from_str(ck.text("jepa.config")?)?;
        let mut model = JepaModel::new(config)?;
        model.pair.momentum_state = serde_json::from_str(ck.text("jepa.schedule")?)?;
        ck.load_store("jepa.context/", &mut model.pair.context)?;
        ck.load_store("jepa.target/", &mut model.pair.target)?;
        ck.load_store("jepa.predictor/", &mut model.predictor.params)?;
        let steps = ck.u64("jepa.optim.steps")?;
        if steps > 0 {
            let stores: [&ParamStore<f32>; 2] = [&model.pair.context, &model.predictor.params];
            let mut all = Vec::new();
            for (s, store) in stores.iter().enumerate() {
                let mut ms = Vec::new();
                for p in store.iter() {
                    let base = format!("{}/{}", STORES[s], p.name());
                    ms.push(Moments {
                        first: ck.tensor(&format!("jepa.optim.first/{base}"))?.clone(),
                        second: ck.tensor(&format!("jepa.optim.second/{base}"))?.clone(),
                    });
                }
                all.push(ms);
            }
            model.optimizer.set_moments(all, steps);
        }
        Ok(model)
    }
}
