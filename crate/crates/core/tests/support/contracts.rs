//! Freeze and loss-support contracts, shared by the unit suites and the
//! acceptance run. Each check panics on the first violation.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uijepa_core::datagen::Split;
use uijepa_core::decoder::{build_vocab, DecoderConfig, DecoderExample, FinetuneConfig, Finetuner, FusionOptions, IntentDecoder, Vocab};
use uijepa_core::jepa::{jepa_loss, GroupPrediction, GroupReduction};
use uijepa_core::nn::LoraConfig;
use uijepa_core::numerics::{Array, Graph, Scalar, ScheduleState};

pub fn random_array<T: Scalar>(shape: &[usize], scale: f64, seed: u64) -> Array<T> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Array::from_fn(shape.to_vec(), |_| T::of(r.gen_range(-scale..scale)))
}

pub fn toy_examples(n: usize, tokens: usize, width: usize) -> Vec<DecoderExample> {
    let names = ["Ravi", "Maya", "Liam", "Noah", "Emma"];
    let verbs = [("call {}", "CALLING"), ("add contact named {}", "SAVED"), ("send message hi to {}", "SENT"), ("edit contact {}", "UPDATED")];
    (0..n)
        .map(|i| {
            let name = names[i % names.len()];
            let (template, word) = verbs[(i / names.len()) % verbs.len()];
            DecoderExample {
                id: format!("s{i}"),
                split: Split::Train,
                video: random_array(&[tokens, width], 1.0, 100 + i as u64),
                ocr: vec![word.to_string(), name.to_string()],
                intent: template.replace("{}", name),
            }
        })
        .collect()
}

pub fn small_finetune(steps: u64, lm_steps: u64, seed: u64) -> FinetuneConfig {
    FinetuneConfig {
        decoder: DecoderConfig { depth: 2, width: 32, heads: 2, mlp_ratio: 2.0, max_seq_len: 32 },
        lora: LoraConfig { rank: 4, alpha: 4.0, ..Default::default() },
        lm_steps,
        lm_batch: 4,
        schedule: ScheduleState { lr_peak: 3e-3, lr_start: 1e-3, ..ScheduleState::reference(steps, steps / 20) },
        seed,
        ..Default::default()
    }
}

/// Stage 2 moves every projection and adapter tensor and leaves the base
/// bit-identical, with adapters on and off.
pub fn stage_two_freeze() {
    let data = toy_examples(6, 4, 12);
    let vocab = build_vocab(&data);
    for adapters in [true, false] {
        let cfg = FinetuneConfig { adapters_enabled: adapters, ..small_finetune(5, 3, 1) };
        let mut f = Finetuner::new(cfg, vocab.clone(), 12).unwrap();
        let intents: Vec<String> = data.iter().map(|e| e.intent.clone()).collect();
        f.lm_warmup(&intents, |_| {}).unwrap();
        let base = f.decoder.base.snapshot();
        let proj = f.decoder.projection.snapshot();
        let ad = f.decoder.adapters.snapshot();
        f.train(&data, 5, |_| {}).unwrap();
        assert_eq!(f.decoder.base.snapshot(), base, "base moved");
        assert!(f.decoder.projection.snapshot().iter().zip(&proj).all(|(a, b)| a != b));
        let names = f.trainable_names();
        assert!(names.iter().all(|n| n.starts_with("projection/") || n.starts_with("adapters/")), "{names:?}");
        if adapters {
            assert!(!ad.is_empty());
            // every adapter tensor moves (A through B once B is non-zero)
            assert!(f.decoder.adapters.snapshot().iter().zip(&ad).all(|(a, b)| a != b));
        } else {
            assert!(ad.is_empty());
        }
    }
}

/// Decoder loss and logit gradients do not depend on targets outside the
/// intent span, and the production loss equals the masked full-row loss.
pub fn decoder_loss_support() {
    let v = Vocab::build(["call Ravi", "add contact named Maya", "CALLING Ravi MOBILE"]);
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let config = DecoderConfig { depth: 1, width: 8, heads: 2, mlp_ratio: 2.0, max_seq_len: 16 };
    let d = IntentDecoder::<f64>::new(config, FusionOptions::default(), v.clone(), 6, &mut r).unwrap();
    let video = random_array::<f64>(&[3, 6], 1.0, 9);
    let seq = d.fuse(3, Some(&v.encode("CALLING Ravi")), &v.encode("call Ravi")).unwrap();
    let (targets, mask) = seq.shifted_targets();
    assert!(mask.iter().any(|m| !m) && mask.iter().any(|&m| m));

    let mut g = Graph::new();
    let l = d.logits_all(d.stores(), &mut g, false, Some(&video), &seq).unwrap();
    let values = g.value(l).clone();
    let masked_loss = |targets: &[usize]| {
        let mut g = Graph::new();
        let logits = g.leaf(values.clone());
        let loss = g.cross_entropy(logits, targets, &mask).unwrap();
        let grads = g.backward(loss).unwrap();
        (g.value(loss).item(), grads.wrt(logits).unwrap().clone())
    };
    let (a, ga) = masked_loss(&targets);
    for shift in 1..v.len() {
        let mut other = targets.clone();
        for (t, m) in other.iter_mut().zip(&mask) {
            if !m {
                *t = (*t + shift) % v.len();
            }
        }
        let (b, gb) = masked_loss(&other);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ga, gb);
    }
    for (r, m) in mask.iter().enumerate() {
        if !m {
            assert!(ga.row(r).iter().all(|&x| x == 0.0));
        }
    }

    let mut g = Graph::new();
    let prod = d.loss(d.stores(), &mut g, false, false, Some(&video), &seq, None).unwrap();
    assert!((g.value(prod).item() - a).abs() < 1e-12);
}

/// JEPA loss and prediction gradients are bit-identical whatever the target
/// rows outside every mask group hold.
pub fn jepa_loss_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let targets = Array::<f64>::from_fn([8, 4], |_| rng.gen_range(-1.0..1.0));
    let idx_a = [1usize, 4];
    let idx_b = [0usize, 2, 4, 7];
    let pred_a = random_array::<f64>(&[2, 4], 1.0, 13);
    let pred_b = random_array::<f64>(&[4, 4], 1.0, 14);
    let eval = |targets: &Array<f64>| {
        let mut g = Graph::new();
        let pa = g.leaf(pred_a.clone());
        let pb = g.leaf(pred_b.clone());
        let groups = [
            GroupPrediction { name: "a", indices: &idx_a, pred: pa },
            GroupPrediction { name: "b", indices: &idx_b, pred: pb },
        ];
        let (l, _) = jepa_loss(&mut g, targets, &groups, GroupReduction::Mean).unwrap();
        let grads = g.backward(l).unwrap();
        (g.value(l).item().to_bits(), grads.wrt(pa).unwrap().clone(), grads.wrt(pb).unwrap().clone())
    };
    let base = eval(&targets);
    for trial in 0..20u64 {
        let mut other = targets.clone();
        let mut r = ChaCha8Rng::seed_from_u64(100 + trial);
        for row in [3usize, 5, 6] {
            other.row_mut(row).iter_mut().for_each(|v| *v = r.gen_range(-1e3..1e3));
        }
        assert_eq!(eval(&other), base);
    }
}
