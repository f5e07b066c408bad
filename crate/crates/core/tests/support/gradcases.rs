//! Gradient checks of every differentiable op and of the two tiny
//! end-to-end training objectives, in 64-bit.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uijepa_core::decoder::{DecoderConfig, FusionOptions, FusionSequence, IntentDecoder, Stores, Vocab};
use uijepa_core::jepa::{
    jepa_loss, EncoderConfig, EncoderPair, GroupPrediction, GroupReduction, Predictor, PredictorConfig, VideoEncoder,
};
use uijepa_core::nn::{Ctx, LoraConfig};
use uijepa_core::numerics::{grad_check, grad_check_params, Array, GradCheckReport, Graph, Objective, ParamStore, Scalar, ScheduleState, Var};
use uijepa_core::video::{Coord, GridDims, TokenGrid};

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-5;

pub fn rand_array(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Array<f64> {
    Array::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0) * scale)
}

/// Reduce a non-scalar output to a scalar with fixed random weights so every
/// output coordinate contributes a distinct amount.
pub fn weighted_sum(g: &mut Graph<f64>, x: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array::from_fn(g.shape(x).to_vec(), |_| rng.gen_range(-1.0..1.0));
    let wv = g.constant(w);
    let p = g.mul(x, wv).unwrap();
    g.sum(p)
}

/// Worst relative error of `f` over five random points.
fn worst(shapes: &[&[usize]], f: impl Fn(&mut Graph<f64>, &[Var]) -> Var) -> f64 {
    let mut max = 0.0f64;
    for trial in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let point: Vec<Array<f64>> = shapes.iter().map(|s| rand_array(&mut rng, s, 1.0)).collect();
        let report = grad_check(|g, v| Ok(f(g, v)), &point, EPS).unwrap();
        max = max.max(report.max_rel_error);
    }
    max
}

/// `(op, worst relative error)` for every forward op.
pub fn op_suite() -> Vec<(&'static str, f64)> {
    let mut out = vec![
        ("matmul", worst(&[&[3, 4], &[4, 5]], |g, v| {
            let y = g.matmul(v[0], v[1]).unwrap();
            weighted_sum(g, y, 1)
        })),
        ("affine", worst(&[&[3, 4], &[4, 2], &[2]], |g, v| {
            let y = g.affine(v[0], v[1], v[2]).unwrap();
            weighted_sum(g, y, 2)
        })),
        ("add/add_row", worst(&[&[3, 4], &[3, 4], &[4]], |g, v| {
            let a = g.add(v[0], v[1]).unwrap();
            let b = g.add_row(a, v[2]).unwrap();
            weighted_sum(g, b, 3)
        })),
        ("layer_norm", worst(&[&[3, 6], &[6], &[6]], |g, v| {
            let y = g.layer_norm(v[0], Some((v[1], v[2])), 1e-6).unwrap();
            weighted_sum(g, y, 4)
        })),
        ("layer_norm plain", worst(&[&[2, 5]], |g, v| {
            let y = g.layer_norm(v[0], None, 1e-6).unwrap();
            weighted_sum(g, y, 5)
        })),
        ("gelu", worst(&[&[4, 3]], |g, v| {
            let y = g.gelu(v[0]);
            weighted_sum(g, y, 6)
        })),
        ("softmax", worst(&[&[3, 5]], |g, v| {
            let y = g.softmax(v[0]).unwrap();
            weighted_sum(g, y, 7)
        })),
        ("cross attention", worst(&[&[2, 6], &[5, 6], &[5, 6]], |g, v| {
            let y = g.attention(v[0], v[1], v[2], 3, false).unwrap();
            weighted_sum(g, y, 9)
        })),
        ("embedding", worst(&[&[5, 3]], |g, v| {
            let e = g.embedding(v[0], &[4, 1, 1, 0]).unwrap();
            weighted_sum(g, e, 10)
        })),
        ("concat/gather/slice/mean", worst(&[&[3, 4], &[2, 4]], |g, v| {
            let c = g.concat_rows(&[v[0], v[1]]).unwrap();
            let r = g.gather_rows(c, &[4, 0, 0, 2]).unwrap();
            let s = g.slice_cols(r, 1, 2).unwrap();
            let m = g.mean_rows(s).unwrap();
            weighted_sum(g, m, 11)
        })),
        ("scale", worst(&[&[2, 2]], |g, v| {
            let s = g.scale(v[0], -2.5);
            weighted_sum(g, s, 12)
        })),
        ("cross_entropy", worst(&[&[4, 6]], |g, v| {
            g.cross_entropy(v[0], &[1, 5, 0, 2], &[true, false, true, true]).unwrap()
        })),
    ];
    for (name, causal) in [("attention", false), ("causal attention", true)] {
        out.push((name, worst(&[&[4, 6], &[4, 6], &[4, 6]], |g, v| {
            let y = g.attention(v[0], v[1], v[2], 2, causal).unwrap();
            weighted_sum(g, y, 8)
        })));
    }
    // l1 is smooth away from pred == target; random points are there a.s.
    let target = Arc::new(Array::from_fn([3, 4], |i| (i as f64 * 0.37).sin() * 2.0));
    out.push(("l1_mean", worst(&[&[3, 4]], move |g, v| g.l1_mean(v[0], target.clone(), &[true, false, true]).unwrap())));
    out
}

pub fn randomize(store: &mut ParamStore<f64>, std: f64, rng: &mut ChaCha8Rng) {
    for p in store.iter_mut() {
        let centre = if p.name().ends_with(".g") { 1.0 } else { 0.0 };
        p.value_mut().data_mut().iter_mut().for_each(|v| *v = centre + rng.gen_range(-std..std));
    }
}

pub fn random_grid(dims: GridDims, in_dim: usize, seed: u64) -> TokenGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TokenGrid {
        tokens: Array::from_fn([dims.len(), in_dim], |_| rng.gen_range(-1.0..1.0)),
        coords: dims.coords(),
        dims,
    }
}

pub fn tiny_encoder() -> EncoderConfig {
    EncoderConfig { depth: 2, width: 16, heads: 2, mlp_ratio: 2.0 }
}

pub fn tiny_predictor() -> PredictorConfig {
    PredictorConfig { depth: 2, width: 8, heads: 2, mlp_ratio: 2.0 }
}

struct TinyJepa<'a> {
    encoder: &'a VideoEncoder,
    predictor: &'a Predictor<f64>,
    grid: &'a TokenGrid,
    targets: &'a Array<f64>,
    groups: Vec<(&'static str, Vec<usize>)>,
}

impl Objective for TinyJepa<'_> {
    fn eval<T: Scalar>(&self, g: &mut Graph<T>, stores: &[&ParamStore<T>]) -> uijepa_core::Result<Var> {
        let tokens = self.grid.tokens.cast::<T>();
        let n = self.grid.len();
        let mut preds = Vec::new();
        for (name, idx) in &self.groups {
            let keep: Vec<usize> = (0..n).filter(|i| !idx.contains(i)).collect();
            let enc = self.encoder.forward(&mut Ctx::new(stores[0], true), g, &tokens, &self.grid.coords, &keep)?;
            let kc: Vec<Coord> = keep.iter().map(|&i| self.grid.coords[i]).collect();
            let mc: Vec<Coord> = idx.iter().map(|&i| self.grid.coords[i]).collect();
            let p = self.predictor.forward_with(stores[1], g, true, enc, &kc, &mc)?;
            preds.push(GroupPrediction { name, indices: idx, pred: p });
        }
        Ok(jepa_loss(g, &self.targets.cast(), &preds, GroupReduction::Mean)?.0)
    }
}

/// Context encoder + predictor + masked L1 loss on a 2x2x2 grid with
/// randomized parameters.
pub fn tiny_jepa_check() -> GradCheckReport {
    let dims = GridDims::new(2, 2, 2);
    let grid = random_grid(dims, 12, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pair = EncoderPair::<f64>::new(tiny_encoder(), 12, ScheduleState::reference(10, 1), &mut rng).unwrap();
    let mut pred = Predictor::<f64>::new(tiny_predictor(), 16, &mut rng).unwrap();
    randomize(&mut pair.context, 0.3, &mut rng);
    randomize(&mut pair.target, 0.3, &mut rng);
    randomize(&mut pred.params, 0.3, &mut rng);
    let targets = pair.encode_target(&grid).unwrap();
    let objective = TinyJepa {
        encoder: &pair.encoder,
        predictor: &pred,
        grid: &grid,
        targets: &targets,
        groups: vec![("a", vec![0, 3, 5]), ("b", vec![4, 5, 6, 7])],
    };
    grad_check_params(&[&pair.context, &pred.params], &objective, 1e-6, 1).unwrap()
}

struct FusedStep<'a> {
    decoder: &'a IntentDecoder<f64>,
    video: &'a Array<f64>,
    seq: &'a FusionSequence,
}

impl Objective for FusedStep<'_> {
    fn eval<T: Scalar>(&self, g: &mut Graph<T>, stores: &[&ParamStore<T>]) -> uijepa_core::Result<Var> {
        let s = Stores { base: stores[0], projection: stores[1], adapters: Some(stores[2]) };
        self.decoder.loss(s, g, true, true, Some(&self.video.cast()), self.seq, None)
    }
}

/// Fused video + OCR + intent decoder loss with rank-2 adapters, every
/// parameter group randomized.
pub fn tiny_decoder_check() -> GradCheckReport {
    let v = Vocab::build(["call Ravi", "add contact named Maya", "CALLING Ravi MOBILE"]);
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let config = DecoderConfig { depth: 1, width: 8, heads: 2, mlp_ratio: 2.0, max_seq_len: 16 };
    let mut d = IntentDecoder::<f64>::new(config, FusionOptions::default(), v.clone(), 6, &mut r).unwrap();
    d.attach_adapters(LoraConfig { rank: 2, alpha: 4.0, dropout: 0.0, ..Default::default() }, &mut r).unwrap();
    randomize(&mut d.base, 0.3, &mut r);
    randomize(&mut d.projection, 0.3, &mut r);
    randomize(&mut d.adapters, 0.3, &mut r);
    let mut vr = ChaCha8Rng::seed_from_u64(2);
    let video = Array::from_fn([3, 6], |_| vr.gen_range(-1.0..1.0));
    let seq = d.fuse(3, Some(&v.encode("CALLING Ravi")), &v.encode("call Ravi")).unwrap();
    let objective = FusedStep { decoder: &d, video: &video, seq: &seq };
    grad_check_params(&[&d.base, &d.projection, &d.adapters], &objective, 1e-6, 1).unwrap()
}
