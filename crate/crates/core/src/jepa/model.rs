use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{normal_array, Ctx, Linear, Transformer, TransformerConfig, INIT_STD};
use crate::numerics::{Array, Graph, ParamId, ParamStore, Scalar, ScheduleState, Var, LAYER_NORM_EPS};
use crate::video::{positional_encoding, Coord, TokenGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { depth: 6, width: 192, heads: 3, mlp_ratio: 4.0 }
    }
}

impl EncoderConfig {
    pub fn transformer(&self) -> TransformerConfig {
        TransformerConfig { depth: self.depth, width: self.width, heads: self.heads, mlp_ratio: self.mlp_ratio }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { depth: 3, width: 96, heads: 3, mlp_ratio: 4.0 }
    }
}

impl PredictorConfig {
    pub fn transformer(&self) -> TransformerConfig {
        TransformerConfig { depth: self.depth, width: self.width, heads: self.heads, mlp_ratio: self.mlp_ratio }
    }
}

/// Tubelet embedding plus a bidirectional transformer.
#[derive(Debug, Clone)]
pub struct VideoEncoder {
    pub config: EncoderConfig,
    pub in_dim: usize,
    pub patch: Linear,
    pub body: Transformer,
}

impl VideoEncoder {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        config: EncoderConfig,
        in_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let patch = Linear::new(store, "patch", in_dim, config.width, INIT_STD, rng);
        let body = Transformer::new(store, "", config.transformer(), false, rng)?;
        Ok(VideoEncoder { config, in_dim, patch, body })
    }

    /// Encode only the rows `keep` of `tokens`; other tokens never enter
    /// the sequence, so attention cannot see them.
    pub fn forward<T: Scalar>(
        &self,
        ctx: &mut Ctx<'_, T>,
        g: &mut Graph<T>,
        tokens: &Array<T>,
        coords: &[Coord],
        keep: &[usize],
    ) -> Result<Var> {
        if tokens.cols() != self.in_dim || tokens.rows() != coords.len() {
            return Err(Error::Shape {
                op: "VideoEncoder::forward",
                detail: format!("tokens {:?} with {} coords, expected width {}", tokens.shape(), coords.len(), self.in_dim),
            });
        }
        let x = g.constant(tokens.gather_rows(keep));
        let kc: Vec<Coord> = keep.iter().map(|&i| coords[i]).collect();
        let pe = g.constant(positional_encoding::<T>(&kc, self.config.width));
        let h = self.patch.forward(ctx, g, x)?;
        let h = g.add(h, pe)?;
        self.body.forward(ctx, g, h)
    }
}

/// Ascending indices of `0..n` not in `masked`.
pub fn unmasked_indices(n: usize, masked: &[usize]) -> Result<Vec<usize>> {
    let mut hidden = vec![false; n];
    for &i in masked {
        if i >= n {
            return Err(Error::contract(format!("masked index {i} outside grid of {n} tokens")));
        }
        hidden[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !hidden[i]).collect();
    if keep.is_empty() {
        return Err(Error::contract("mask leaves no context tokens"));
    }
    Ok(keep)
}

/// Context encoder, its EMA copy, and the schedule state driving momentum.
#[derive(Debug)]
pub struct EncoderPair<T> {
    pub encoder: VideoEncoder,
    pub context: ParamStore<T>,
    pub target: ParamStore<T>,
    pub momentum_state: ScheduleState,
}

impl<T: Scalar> EncoderPair<T> {
    /// Random context encoder; the target starts as an exact copy.
    pub fn new(config: EncoderConfig, in_dim: usize, schedule: ScheduleState, rng: &mut impl Rng) -> Result<Self> {
        let mut context = ParamStore::new();
        let encoder = VideoEncoder::new(&mut context, config, in_dim, rng)?;
        let mut target = context.fork();
        target.set_trainable(false);
        Ok(EncoderPair { encoder, context, target, momentum_state: schedule })
    }

    pub fn width(&self) -> usize {
        self.encoder.config.width
    }

    /// Context embeddings for the unmasked tokens, in ascending index order.
    pub fn encode_context(&self, grid: &TokenGrid, masked: &[usize]) -> Result<Array<T>> {
        let keep = unmasked_indices(grid.len(), masked)?;
        let mut g = Graph::new();
        let out = self.encoder.forward(&mut Ctx::new(&self.context, false), &mut g, &grid.tokens_as(), &grid.coords, &keep)?;
        Ok(g.value(out).clone())
    }

    /// Per-token layer-normalised target-encoder embeddings of the full grid.
    pub fn encode_target(&self, grid: &TokenGrid) -> Result<Array<T>> {
        self.encode_target_tokens(&grid.tokens_as(), &grid.coords)
    }

    pub(crate) fn encode_target_tokens(&self, tokens: &Array<T>, coords: &[Coord]) -> Result<Array<T>> {
        let all: Vec<usize> = (0..coords.len()).collect();
        let mut g = Graph::new();
        let out = self.encoder.forward(&mut Ctx::new(&self.target, false), &mut g, tokens, coords, &all)?;
        let out = g.layer_norm(out, None, T::of(LAYER_NORM_EPS))?;
        Ok(g.value(out).clone())
    }

    /// `target <- m * target + (1 - m) * context` for every tensor.
    pub fn ema_update(&mut self, m: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::contract(format!("momentum {m} outside [0, 1]")));
        }
        let (a, b) = (T::of(m), T::of(1.0 - m));
        for (t, c) in self.target.iter_mut().zip(self.context.iter()) {
            let cv = c.value();
            for (x, &y) in t.value_mut().data_mut().iter_mut().zip(cv.data()) {
                *x = a * *x + b * y;
            }
        }
        Ok(())
    }

    /// Mean of the context encoder's token embeddings over the whole grid.
    pub fn embed_video(&self, grid: &TokenGrid) -> Result<Vec<T>> {
        let emb = self.encode_context(grid, &[])?;
        Ok(column_means(&emb))
    }
}

pub(crate) fn column_means<T: Scalar>(a: &Array<T>) -> Vec<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut out = vec![T::ZERO; n];
    for r in 0..m {
        for (o, &v) in out.iter_mut().zip(a.row(r)) {
            *o += v;
        }
    }
    let inv = T::ONE / T::of(m.max(1) as f64);
    out.iter_mut().for_each(|v| *v *= inv);
    out
}

/// Mean over columns of the per-column population standard deviation.
pub fn embedding_std<T: Scalar>(a: &Array<T>) -> f64 {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..n {
        let mean = (0..m).map(|r| a.row(r)[c].to_f64()).sum::<f64>() / m as f64;
        let var = (0..m).map(|r| (a.row(r)[c].to_f64() - mean).powi(2)).sum::<f64>() / m as f64;
        total += var.sqrt();
    }
    total / n as f64
}

/// Narrow transformer that maps context embeddings plus positioned mask
/// tokens to predicted target embeddings.
#[derive(Debug)]
pub struct Predictor<T> {
    pub config: PredictorConfig,
    pub encoder_width: usize,
    pub embed: Linear,
    pub mask_token: ParamId,
    pub body: Transformer,
    pub out: Linear,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Predictor<T> {
    pub fn new(config: PredictorConfig, encoder_width: usize, rng: &mut impl Rng) -> Result<Self> {
        if config.width > encoder_width {
            return Err(Error::contract(format!(
                "predictor width {} exceeds encoder width {encoder_width}",
                config.width
            )));
        }
        let mut params = ParamStore::new();
        let embed = Linear::new(&mut params, "embed", encoder_width, config.width, INIT_STD, rng);
        let mask_token = params.add("mask_token", normal_array(&[1, config.width], INIT_STD, rng));
        let body = Transformer::new(&mut params, "", config.transformer(), false, rng)?;
        let out = Linear::new(&mut params, "out", config.width, encoder_width, INIT_STD, rng);
        Ok(Predictor { config, encoder_width, embed, mask_token, body, out, params })
    }

    /// Predictions at `masked` coordinates, one row each, in the given order.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        track: bool,
        context: Var,
        context_coords: &[Coord],
        masked: &[Coord],
    ) -> Result<Var> {
        self.forward_with(&self.params, g, track, context, context_coords, masked)
    }

    /// [`Predictor::forward`] reading parameters from `params`, which must
    /// have this predictor's layout (possibly at another precision).
    pub fn forward_with<U: Scalar>(
        &self,
        params: &ParamStore<U>,
        g: &mut Graph<U>,
        track: bool,
        context: Var,
        context_coords: &[Coord],
        masked: &[Coord],
    ) -> Result<Var> {
        if masked.is_empty() {
            return Err(Error::contract("predictor called with no masked coordinates"));
        }
        let w = self.config.width;
        let mut ctx = Ctx::new(params, track);
        let h = self.embed.forward(&mut ctx, g, context)?;
        let pe_ctx = g.constant(positional_encoding::<U>(context_coords, w));
        let h = g.add(h, pe_ctx)?;
        let pe_mask = g.constant(positional_encoding::<U>(masked, w));
        let token = ctx.p(g, self.mask_token);
        let m = g.add_row(pe_mask, token)?;
        let x = g.concat_rows(&[h, m])?;
        let y = self.body.forward(&mut ctx, g, x)?;
        let n = context_coords.len();
        let tail: Vec<usize> = (n..n + masked.len()).collect();
        let y = g.gather_rows(y, &tail)?;
        self.out.forward(&mut ctx, g, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupReduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JepaLossReport {
    pub per_group_loss: BTreeMap<String, f64>,
    pub total: f64,
    pub embedding_std: f64,
    /// Groups left out because their mask was empty or covered every token.
    pub skipped_groups: usize,
}

/// Predictions for one mask group, in the order of `indices`.
#[derive(Debug, Clone, Copy)]
pub struct GroupPrediction<'a> {
    pub name: &'a str,
    pub indices: &'a [usize],
    pub pred: Var,
}

/// Mean absolute error of each group's predictions against the target rows
/// at that group's masked indices, reduced over groups.
///
/// Only the rows of `targets` listed in some group are read.
pub fn jepa_loss<T: Scalar>(
    g: &mut Graph<T>,
    targets: &Array<T>,
    groups: &[GroupPrediction<'_>],
    reduction: GroupReduction,
) -> Result<(Var, BTreeMap<String, f64>)> {
    if groups.is_empty() {
        return Err(Error::contract("jepa_loss: no groups"));
    }
    let mut losses = Vec::with_capacity(groups.len());
    let mut per_group = BTreeMap::new();
    for gp in groups {
        let rows = g.shape(gp.pred).first().copied().unwrap_or(0);
        if rows != gp.indices.len() {
            return Err(Error::contract(format!(
                "group {}: {} predictions for {} masked tokens",
                gp.name,
                rows,
                gp.indices.len()
            )));
        }
        if let Some(&bad) = gp.indices.iter().find(|&&i| i >= targets.rows()) {
            return Err(Error::contract(format!("group {}: index {bad} outside targets", gp.name)));
        }
        let t = Arc::new(targets.gather_rows(gp.indices));
        let l = g.l1_mean(gp.pred, t, &vec![true; rows])?;
        per_group.insert(gp.name.to_string(), g.value(l).item().to_f64());
        losses.push(l);
    }
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = g.add(total, l)?;
    }
    if reduction == GroupReduction::Mean {
        total = g.scale(total, T::of(1.0 / losses.len() as f64));
    }
    Ok((total, per_group))
}
