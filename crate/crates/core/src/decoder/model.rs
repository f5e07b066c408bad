use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fusion::{build_fusion, FusionSequence};
use super::vocab::{Vocab, END, PAD, SEP, UNK};
use crate::error::{Error, Result};
use crate::nn::{normal_array, Ctx, Linear, LoraConfig, LoraSet, Transformer, TransformerConfig, INIT_STD};
use crate::numerics::{Array, Graph, ParamId, ParamStore, Scalar, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
    pub max_seq_len: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { depth: 4, width: 192, heads: 3, mlp_ratio: 4.0, max_seq_len: 256 }
    }
}

impl DecoderConfig {
    pub fn transformer(&self) -> TransformerConfig {
        TransformerConfig { depth: self.depth, width: self.width, heads: self.heads, mlp_ratio: self.mlp_ratio }
    }
}

/// Switches for how sequences are fused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionOptions {
    pub ocr_enabled: bool,
    /// Ablation: add decoder position embeddings `0..n` to the video slots.
    pub video_positions: bool,
    pub loss_on_end: bool,
}

impl Default for FusionOptions {
    fn default() -> Self {
        FusionOptions { ocr_enabled: true, video_positions: false, loss_on_end: true }
    }
}

/// Decoding strategy; a temperature of zero is greedy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Temperature(f64),
}

/// Parameter stores of one decoder, split by training stage.
#[derive(Clone, Copy)]
pub struct Stores<'a, T> {
    pub base: &'a ParamStore<T>,
    pub projection: &'a ParamStore<T>,
    pub adapters: Option<&'a ParamStore<T>>,
}

/// Small causal text decoder with an affine video projection in front and
/// optional low-rank adapters on its projections.
#[derive(Debug)]
pub struct IntentDecoder<T> {
    pub config: DecoderConfig,
    pub options: FusionOptions,
    pub vocab: Vocab,
    pub video_width: usize,
    tok_emb: ParamId,
    pos_emb: ParamId,
    body: Transformer,
    head: Linear,
    proj: Linear,
    lora: Option<LoraSet>,
    pub base: ParamStore<T>,
    pub projection: ParamStore<T>,
    pub adapters: ParamStore<T>,
}

impl<T: Scalar> IntentDecoder<T> {
    pub fn new(
        config: DecoderConfig,
        options: FusionOptions,
        vocab: Vocab,
        video_width: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut base = ParamStore::new();
        let tok_emb = base.add("tok_emb", normal_array(&[vocab.len(), config.width], INIT_STD, rng));
        let pos_emb = base.add("pos_emb", normal_array(&[config.max_seq_len, config.width], INIT_STD, rng));
        let body = Transformer::new(&mut base, "", config.transformer(), true, rng)?;
        let head = Linear::new(&mut base, "head", config.width, vocab.len(), INIT_STD, rng);
        let mut projection = ParamStore::new();
        let proj = Linear::new(&mut projection, "proj", video_width, config.width, INIT_STD, rng);
        Ok(IntentDecoder {
            config,
            options,
            vocab,
            video_width,
            tok_emb,
            pos_emb,
            body,
            head,
            proj,
            lora: None,
            base,
            projection,
            adapters: ParamStore::new(),
        })
    }

    /// Attach zero-initialised adapters to the decoder projections.
    pub fn attach_adapters(&mut self, config: LoraConfig, rng: &mut impl Rng) -> Result<()> {
        if self.lora.is_some() {
            return Err(Error::contract("adapters already attached"));
        }
        self.lora = Some(LoraSet::attach(&self.body, &mut self.adapters, config, rng));
        Ok(())
    }

    pub fn lora(&self) -> Option<&LoraSet> {
        self.lora.as_ref()
    }

    pub fn stores(&self) -> Stores<'_, T> {
        Stores { base: &self.base, projection: &self.projection, adapters: self.lora.as_ref().map(|_| &self.adapters) }
    }

    /// Fused sequence for `intent` (ids) with optional OCR ids.
    pub fn fuse(&self, video_slots: usize, ocr: Option<&[usize]>, intent: &[usize]) -> Result<FusionSequence> {
        let ocr = ocr.filter(|_| self.options.ocr_enabled);
        build_fusion(video_slots, ocr, intent, self.config.max_seq_len, true, self.options.loss_on_end)
    }

    /// Video embeddings through the affine projection, one slot per token.
    pub fn project_video<U: Scalar>(
        &self,
        projection: &ParamStore<U>,
        g: &mut Graph<U>,
        track: bool,
        video: &Array<U>,
    ) -> Result<Var> {
        if video.shape().len() != 2 || video.cols() != self.video_width {
            return Err(Error::Shape {
                op: "project_video",
                detail: format!("expected [n, {}], got {:?}", self.video_width, video.shape()),
            });
        }
        let x = g.constant(video.clone());
        self.proj.forward(&mut Ctx::new(projection, track), g, x)
    }

    /// Hidden states for input slots `0..upto` of `seq`. Base parameters are
    /// recorded for gradients only when `track_base` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn hidden<U: Scalar>(
        &self,
        stores: Stores<'_, U>,
        g: &mut Graph<U>,
        track_base: bool,
        track_projection: bool,
        video: Option<&Array<U>>,
        seq: &FusionSequence,
        upto: usize,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let lora = match (stores.adapters, &self.lora) {
            (Some(s), Some(l)) => Some((s, l)),
            _ => None,
        };
        let mut ctx = Ctx { store: stores.base, track: track_base, lora, dropout };
        let mut parts = Vec::new();
        let nv = seq.video_slots.min(upto);
        if seq.video_slots > 0 {
            let video = video.ok_or_else(|| Error::contract("sequence has video slots but no video was given"))?;
            if video.rows() != seq.video_slots {
                return Err(Error::contract(format!("{} video rows for {} slots", video.rows(), seq.video_slots)));
            }
            let mut v = self.project_video(stores.projection, g, track_projection, video)?;
            if nv < seq.video_slots {
                v = g.gather_rows(v, &(0..nv).collect::<Vec<_>>())?;
            }
            if self.options.video_positions {
                let pos = ctx.p(g, self.pos_emb);
                let p = g.embedding(pos, &(0..nv).collect::<Vec<_>>())?;
                v = g.add(v, p)?;
            }
            parts.push(v);
        }
        let text_upto = upto.saturating_sub(seq.video_slots);
        if text_upto > 0 {
            let tok = ctx.p(g, self.tok_emb);
            let pos = ctx.p(g, self.pos_emb);
            let ids = &seq.text_ids[..text_upto];
            let positions = &seq.position_ids[seq.video_slots..seq.video_slots + text_upto];
            // unpositioned prefix (the leading SEP), then positioned tokens
            let split = positions.iter().take_while(|p| p.is_none()).count();
            if split > 0 {
                parts.push(g.embedding(tok, &ids[..split])?);
            }
            if split < ids.len() {
                let e = g.embedding(tok, &ids[split..])?;
                let pids: Vec<usize> = positions[split..].iter().map(|p| p.expect("contiguous positions")).collect();
                if let Some(&bad) = pids.iter().find(|&&p| p >= self.config.max_seq_len) {
                    return Err(Error::contract(format!("position {bad} beyond max length")));
                }
                let p = g.embedding(pos, &pids)?;
                parts.push(g.add(e, p)?);
            }
        }
        let x = if parts.len() == 1 { parts[0] } else { g.concat_rows(&parts)? };
        self.body.forward(&mut ctx, g, x)
    }

    fn head_forward<U: Scalar>(&self, stores: Stores<'_, U>, g: &mut Graph<U>, track: bool, h: Var) -> Result<Var> {
        self.head.forward(&mut Ctx::new(stores.base, track), g, h)
    }

    /// Mean next-token cross entropy over the slots in the loss mask, with
    /// causal attention across the whole fused sequence. Only rows that
    /// predict a masked slot reach the output head.
    #[allow(clippy::too_many_arguments)]
    pub fn loss<U: Scalar>(
        &self,
        stores: Stores<'_, U>,
        g: &mut Graph<U>,
        track_base: bool,
        track_projection: bool,
        video: Option<&Array<U>>,
        seq: &FusionSequence,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let (targets, mask) = seq.shifted_targets();
        let rows: Vec<usize> = (0..targets.len()).filter(|&r| mask[r]).collect();
        if rows.is_empty() {
            return Err(Error::contract("decoder loss: no positions in the loss mask"));
        }
        let h = self.hidden(stores, g, track_base, track_projection, video, seq, seq.len() - 1, dropout)?;
        let h = g.gather_rows(h, &rows)?;
        let logits = self.head_forward(stores, g, track_base, h)?;
        let t: Vec<usize> = rows.iter().map(|&r| targets[r]).collect();
        g.cross_entropy(logits, &t, &vec![true; t.len()])
    }

    /// Logits for every input slot, `[len - 1, vocab]`.
    pub fn logits_all<U: Scalar>(
        &self,
        stores: Stores<'_, U>,
        g: &mut Graph<U>,
        track: bool,
        video: Option<&Array<U>>,
        seq: &FusionSequence,
    ) -> Result<Var> {
        let h = self.hidden(stores, g, track, track, video, seq, seq.len() - 1, None)?;
        self.head_forward(stores, g, track, h)
    }

    /// Decode an intent after the final SEP. Stops at END or after
    /// `max_len` tokens; returns the text and whether it was cut off.
    /// PAD, UNK and SEP are never emitted.
    pub fn generate(
        &self,
        video: &Array<T>,
        ocr: Option<&[usize]>,
        mode: DecodeMode,
        max_len: usize,
        rng: &mut impl Rng,
    ) -> Result<(String, bool)> {
        let ocr = ocr.filter(|_| self.options.ocr_enabled);
        let budget = self.config.max_seq_len.saturating_sub(max_len + 1);
        let mut seq = build_fusion(video.rows(), ocr, &[], budget.max(video.rows() + 1), false, false)?;
        let mut out = Vec::new();
        let mut truncated = true;
        for _ in 0..max_len {
            let next_pos = seq.position_ids.iter().rev().find_map(|p| *p).map_or(0, |p| p + 1);
            let mut g = Graph::new();
            let h = self.hidden(self.stores(), &mut g, false, false, Some(video), &seq, seq.len(), None)?;
            let last = g.gather_rows(h, &[seq.len() - 1])?;
            let logits = self.head_forward(self.stores(), &mut g, false, last)?;
            let row: Vec<f64> = g.value(logits).to_f64_vec();
            let id = pick(&row, mode, rng);
            if id == END {
                truncated = false;
                break;
            }
            out.push(id);
            seq.text_ids.push(id);
            seq.position_ids.push(Some(next_pos));
            seq.loss_mask.push(false);
        }
        Ok((self.vocab.decode(&out), truncated))
    }
}

fn pick(logits: &[f64], mode: DecodeMode, rng: &mut impl Rng) -> usize {
    let allowed = |i: usize| !matches!(i, PAD | UNK | SEP);
    let greedy = || {
        (0..logits.len()).filter(|&i| allowed(i)).fold(END, |best, i| if logits[i] > logits[best] { i } else { best })
    };
    match mode {
        DecodeMode::Temperature(tau) if tau > 0.0 => {
            let mx = (0..logits.len()).filter(|&i| allowed(i)).map(|i| logits[i]).fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> =
                (0..logits.len()).map(|i| if allowed(i) { ((logits[i] - mx) / tau).exp() } else { 0.0 }).collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            for (i, wi) in w.iter().enumerate() {
                if *wi > 0.0 {
                    if u < *wi {
                        return i;
                    }
                    u -= wi;
                }
            }
            greedy()
        }
        _ => greedy(),
    }
}

/// Dropout generator for training step `step`, independent of history.
pub(crate) fn dropout_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1B5_4A32_D192_ED03);
    rng.set_stream(step);
    rng
}
