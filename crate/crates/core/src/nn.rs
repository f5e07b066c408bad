//! Transformer building blocks shared by the video encoder, the predictor
//! and the text decoder, plus low-rank adapters on their projections.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Array, Graph, ParamId, ParamStore, Scalar, Var, LAYER_NORM_EPS};

/// Standard deviation of the truncated-normal style weight init.
pub const INIT_STD: f64 = 0.02;

pub(crate) fn normal_array<T: Scalar>(shape: &[usize], std: f64, rng: &mut impl Rng) -> Array<T> {
    let dist = Normal::new(0.0, std).expect("std");
    Array::from_fn(shape.to_vec(), |_| {
        // truncate at two standard deviations
        loop {
            let v: f64 = dist.sample(rng);
            if v.abs() <= 2.0 * std {
                return T::of(v);
            }
        }
    })
}

/// Everything a forward pass needs besides the graph: the parameter store,
/// whether to record gradients, optional adapters, and a dropout generator
/// (present only in training mode).
pub struct Ctx<'a, T: Scalar> {
    pub store: &'a ParamStore<T>,
    pub track: bool,
    pub lora: Option<(&'a ParamStore<T>, &'a LoraSet)>,
    pub dropout: Option<&'a mut ChaCha8Rng>,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    pub fn new(store: &'a ParamStore<T>, track: bool) -> Self {
        Ctx { store, track, lora: None, dropout: None }
    }

    pub fn p(&self, g: &mut Graph<T>, id: ParamId) -> Var {
        g.param(self.store.get(id), self.track)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub name: String,
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add(format!("{name}.w"), normal_array(&[in_dim, out_dim], std, rng));
        let b = store.add(format!("{name}.b"), Array::zeros([out_dim]));
        Linear { name: name.to_string(), w, b, in_dim, out_dim }
    }

    /// `x W + b`, plus the scaled low-rank update when an adapter is attached.
    pub fn forward<T: Scalar>(&self, ctx: &mut Ctx<'_, T>, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let (w, b) = (ctx.p(g, self.w), ctx.p(g, self.b));
        let base = g.affine(x, w, b)?;
        let Some((lstore, set)) = ctx.lora else { return Ok(base) };
        let Some(pair) = set.pairs.get(&self.name) else { return Ok(base) };
        let xin = match ctx.dropout.as_deref_mut() {
            Some(rng) if set.config.dropout > 0.0 => {
                let p = set.config.dropout;
                let keep = T::of(1.0 / (1.0 - p));
                let mask = Array::from_fn(g.shape(x).to_vec(), |_| if rng.gen::<f64>() < p { T::ZERO } else { keep });
                let m = g.constant(mask);
                g.mul(x, m)?
            }
            _ => x,
        };
        let a = g.param(lstore.get(pair.a), ctx.track);
        let bb = g.param(lstore.get(pair.b), ctx.track);
        let low = g.matmul(xin, a)?;
        let up = g.matmul(low, bb)?;
        let scaled = g.scale(up, T::of(set.config.alpha / set.config.rank as f64));
        g.add(base, scaled)
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl Norm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, width: usize) -> Self {
        Norm {
            gain: store.add(format!("{name}.g"), Array::full([width], T::ONE)),
            bias: store.add(format!("{name}.b"), Array::zeros([width])),
        }
    }

    pub fn forward<T: Scalar>(&self, ctx: &mut Ctx<'_, T>, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let (gn, bn) = (ctx.p(g, self.gain), ctx.p(g, self.bias));
        g.layer_norm(x, Some((gn, bn)), T::of(LAYER_NORM_EPS))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub depth: usize,
    pub width: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::contract(format!("width {} not divisible by heads {}", self.width, self.heads)));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        ((self.width as f64) * self.mlp_ratio).round() as usize
    }
}

/// Pre-norm block: `x + proj(attn(ln1 x))`, then `x + fc2(gelu(fc1(ln2 x)))`.
#[derive(Debug, Clone)]
pub struct Block {
    pub ln1: Norm,
    pub qkv: Linear,
    pub proj: Linear,
    pub ln2: Norm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone)]
pub struct Transformer {
    pub config: TransformerConfig,
    pub blocks: Vec<Block>,
    pub norm: Norm,
    pub causal: bool,
}

impl Transformer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        prefix: &str,
        config: TransformerConfig,
        causal: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        let (d, hidden) = (config.width, config.hidden());
        let blocks = (0..config.depth)
            .map(|i| {
                let n = format!("{prefix}blocks.{i}");
                // residual branches shrink with depth
                let rescale = INIT_STD / (2.0 * (i + 1) as f64).sqrt();
                Block {
                    ln1: Norm::new(store, &format!("{n}.ln1"), d),
                    qkv: Linear::new(store, &format!("{n}.qkv"), d, 3 * d, INIT_STD, rng),
                    proj: Linear::new(store, &format!("{n}.proj"), d, d, rescale, rng),
                    ln2: Norm::new(store, &format!("{n}.ln2"), d),
                    fc1: Linear::new(store, &format!("{n}.fc1"), d, hidden, INIT_STD, rng),
                    fc2: Linear::new(store, &format!("{n}.fc2"), hidden, d, rescale, rng),
                }
            })
            .collect();
        let norm = Norm::new(store, &format!("{prefix}norm"), d);
        Ok(Transformer { config, blocks, norm, causal })
    }

    pub fn block_forward<T: Scalar>(&self, blk: &Block, ctx: &mut Ctx<'_, T>, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let d = self.config.width;
        let h = blk.ln1.forward(ctx, g, x)?;
        let qkv = blk.qkv.forward(ctx, g, h)?;
        let q = g.slice_cols(qkv, 0, d)?;
        let k = g.slice_cols(qkv, d, d)?;
        let v = g.slice_cols(qkv, 2 * d, d)?;
        let a = g.attention(q, k, v, self.config.heads, self.causal)?;
        let a = blk.proj.forward(ctx, g, a)?;
        let x = g.add(x, a)?;
        let h = blk.ln2.forward(ctx, g, x)?;
        let h = blk.fc1.forward(ctx, g, h)?;
        let h = g.gelu(h);
        let h = blk.fc2.forward(ctx, g, h)?;
        g.add(x, h)
    }

    /// All blocks followed by the final norm.
    pub fn forward<T: Scalar>(&self, ctx: &mut Ctx<'_, T>, g: &mut Graph<T>, mut x: Var) -> Result<Var> {
        for blk in &self.blocks {
            x = self.block_forward(blk, ctx, g, x)?;
        }
        self.norm.forward(ctx, g, x)
    }

    /// Projections adapters may attach to: `(kind, linear)`.
    pub fn projections(&self) -> Vec<(AdapterTarget, &Linear)> {
        self.blocks
            .iter()
            .flat_map(|b| {
                [
                    (AdapterTarget::Qkv, &b.qkv),
                    (AdapterTarget::Out, &b.proj),
                    (AdapterTarget::Up, &b.fc1),
                    (AdapterTarget::Down, &b.fc2),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterTarget {
    Qkv,
    Out,
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
    pub targets: Vec<AdapterTarget>,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 16,
            alpha: 16.0,
            dropout: 0.05,
            targets: vec![AdapterTarget::Qkv, AdapterTarget::Out, AdapterTarget::Up, AdapterTarget::Down],
        }
    }
}

/// Low-rank factors for one projection. `a` is stored `[d_in, r]` and `b`
/// `[r, d_out]`, so the update on a row vector is `x a b`.
#[derive(Debug, Clone, Copy)]
pub struct LoraPair {
    pub a: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone)]
pub struct LoraSet {
    pub config: LoraConfig,
    pub pairs: BTreeMap<String, LoraPair>,
}

impl LoraSet {
    /// Attach adapters to every targeted projection of `model`. The up
    /// factor starts at zero, so the adapted model initially equals the base.
    pub fn attach<T: Scalar>(
        model: &Transformer,
        store: &mut ParamStore<T>,
        config: LoraConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let mut pairs = BTreeMap::new();
        for (kind, lin) in model.projections() {
            if !config.targets.contains(&kind) {
                continue;
            }
            let a = store.add(
                format!("{}.lora_a", lin.name),
                normal_array(&[lin.in_dim, config.rank], 1.0 / (lin.in_dim as f64).sqrt(), rng),
            );
            let b = store.add(format!("{}.lora_b", lin.name), Array::zeros([config.rank, lin.out_dim]));
            pairs.insert(lin.name.clone(), LoraPair { a, b });
        }
        LoraSet { config, pairs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny() -> TransformerConfig {
        TransformerConfig { depth: 2, width: 8, heads: 2, mlp_ratio: 2.0 }
    }

    #[test]
    fn zero_init_adapter_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f32>::new();
        let t = Transformer::new(&mut store, "", tiny(), true, &mut rng).unwrap();
        let mut lstore = ParamStore::new();
        let set = LoraSet::attach(&t, &mut lstore, LoraConfig { rank: 4, ..Default::default() }, &mut rng);
        assert_eq!(set.pairs.len(), 8);
        let x = normal_array::<f32>(&[5, 8], 1.0, &mut rng);

        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let base = t.forward(&mut Ctx::new(&store, false), &mut g, xv).unwrap();
        let mut ctx = Ctx { store: &store, track: false, lora: Some((&lstore, &set)), dropout: None };
        let adapted = t.forward(&mut ctx, &mut g, xv).unwrap();
        assert_eq!(g.value(base), g.value(adapted));
    }

    #[test]
    fn identity_adapter_adds_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::<f64>::new();
        let lin = Linear::new(&mut store, "l", 3, 3, 0.5, &mut rng);
        let mut lstore = ParamStore::new();
        let a = lstore.add("l.lora_a", Array::eye(3));
        let b = lstore.add("l.lora_b", Array::eye(3));
        let set = LoraSet {
            config: LoraConfig { rank: 3, alpha: 3.0, dropout: 0.0, targets: vec![] },
            pairs: [("l".to_string(), LoraPair { a, b })].into_iter().collect(),
        };
        let x = Array::from_fn([2, 3], |i| i as f64 - 2.0);
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let base = lin.forward(&mut Ctx::new(&store, false), &mut g, xv).unwrap();
        let mut ctx = Ctx { store: &store, track: false, lora: Some((&lstore, &set)), dropout: None };
        let out = lin.forward(&mut ctx, &mut g, xv).unwrap();
        let want = g.value(base).zip_map(&x, |a, b| a + b);
        assert!(g.value(out).max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn frozen_base_gets_no_gradient_but_adapter_does() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let lin = Linear::new(&mut store, "l", 4, 2, 0.5, &mut rng);
        store.set_trainable(false);
        let mut lstore = ParamStore::new();
        let a = lstore.add("l.lora_a", normal_array(&[4, 2], 1.0, &mut rng));
        let b = lstore.add("l.lora_b", normal_array(&[2, 2], 1.0, &mut rng));
        let set = LoraSet {
            config: LoraConfig { rank: 2, alpha: 4.0, dropout: 0.0, targets: vec![] },
            pairs: [("l".to_string(), LoraPair { a, b })].into_iter().collect(),
        };
        let mut g = Graph::new();
        let xv = g.constant(normal_array(&[3, 4], 1.0, &mut rng));
        let mut ctx = Ctx { store: &store, track: true, lora: Some((&lstore, &set)), dropout: None };
        let out = lin.forward(&mut ctx, &mut g, xv).unwrap();
        let root = g.sum(out);
        let grads = g.backward(root).unwrap();
        assert!(grads.param(store.get(lin.w).key()).is_none());
        assert!(grads.param(store.get(lin.b).key()).is_none());
        assert!(grads.param(lstore.get(a).key()).is_some());
        assert!(grads.param(lstore.get(b).key()).is_some());
    }
}
