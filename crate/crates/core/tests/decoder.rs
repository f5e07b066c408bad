#[path = "support/contracts.rs"]
mod contracts;
#[path = "support/gradcases.rs"]
mod gradcases;

use contracts::{random_array, small_finetune, toy_examples};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uijepa_core::decoder::*;
use uijepa_core::nn::LoraConfig;
use uijepa_core::numerics::{Array, Graph};
use uijepa_core::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tiny_config() -> DecoderConfig {
    DecoderConfig { depth: 1, width: 8, heads: 2, mlp_ratio: 2.0, max_seq_len: 16 }
}

fn vocab() -> Vocab {
    Vocab::build(["call Ravi", "add contact named Maya", "CALLING Ravi MOBILE"])
}

#[test]
fn fused_decoder_gradient_check() {
    let report = gradcases::tiny_decoder_check();
    assert!(report.coords_checked > 1000);
    assert!(report.max_rel_error < 1e-5, "{report:?}");
}

#[test]
fn projection_is_affine_per_token() {
    let mut d = IntentDecoder::<f64>::new(tiny_config(), FusionOptions::default(), vocab(), 6, &mut rng(3)).unwrap();
    let b = d.projection.find("proj.b").unwrap();
    let bias = random_array::<f64>(&[8], 1.0, 4);
    d.projection.get_mut(b).set_value(bias.clone()).unwrap();
    let mut g = Graph::new();
    let out = d.project_video(&d.projection, &mut g, false, &Array::zeros([5, 6])).unwrap();
    assert_eq!(g.shape(out), &[5, 8]);
    for r in 0..5 {
        assert_eq!(g.value(out).row(r), bias.data());
    }
    assert!(d.project_video(&d.projection, &mut g, false, &Array::zeros([5, 7])).is_err());
}

#[test]
fn video_position_flag_only_touches_video_slots() {
    let v = vocab();
    let video = random_array::<f64>(&[3, 6], 1.0, 5);
    let mut hidden = Vec::new();
    for flag in [false, true] {
        let opts = FusionOptions { video_positions: flag, ..Default::default() };
        let d = IntentDecoder::<f64>::new(tiny_config(), opts, v.clone(), 6, &mut rng(6)).unwrap();
        let seq = d.fuse(3, None, &v.encode("call Ravi")).unwrap();
        let mut g = Graph::new();
        // first video slot only: causal attention sees nothing else
        let h = d.hidden(d.stores(), &mut g, false, false, Some(&video), &seq, 1, None).unwrap();
        hidden.push(g.value(h).clone());
    }
    assert!(hidden[0].max_abs_diff(&hidden[1]) > 1e-6);
}

#[test]
fn uniform_logits_give_log_vocab() {
    let v = vocab();
    let mut d = IntentDecoder::<f64>::new(tiny_config(), FusionOptions::default(), v.clone(), 6, &mut rng(7)).unwrap();
    for name in ["head.w", "head.b"] {
        let id = d.base.find(name).unwrap();
        let shape = d.base.value(id).shape().to_vec();
        d.base.get_mut(id).set_value(Array::zeros(shape)).unwrap();
    }
    let seq = d.fuse(2, None, &v.encode("add contact named Maya")).unwrap();
    let mut g = Graph::new();
    let loss = d.loss(d.stores(), &mut g, false, false, Some(&Array::zeros([2, 6])), &seq, None).unwrap();
    assert!((g.value(loss).item() - (v.len() as f64).ln()).abs() < 1e-12);
}

#[test]
fn confident_correct_logits_drive_loss_to_zero() {
    let targets = [2usize, 0, 3];
    let mut last = f64::INFINITY;
    for margin in [1.0, 5.0, 20.0, 60.0] {
        let logits = Array::from_fn([3, 5], |i| if targets[i / 5] == i % 5 { margin } else { 0.0 });
        let mut g = Graph::<f64>::new();
        let l = g.constant(logits);
        let loss = g.cross_entropy(l, &targets, &[true; 3]).unwrap();
        let v = g.value(loss).item();
        assert!(v < last);
        last = v;
    }
    assert!(last < 1e-20);
}

#[test]
fn loss_ignores_unmasked_targets() {
    contracts::decoder_loss_support();
}

#[test]
fn empty_loss_mask_is_a_contract_error() {
    let d = IntentDecoder::<f64>::new(tiny_config(), FusionOptions::default(), vocab(), 6, &mut rng(10)).unwrap();
    let seq = build_fusion(2, None, &[], 16, true, false).unwrap();
    let mut g = Graph::new();
    let err = d.loss(d.stores(), &mut g, false, false, Some(&Array::zeros([2, 6])), &seq, None).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
}

#[test]
fn fresh_adapters_are_bit_identical_to_base() {
    let v = vocab();
    let mut d = IntentDecoder::<f32>::new(tiny_config(), FusionOptions::default(), v.clone(), 6, &mut rng(11)).unwrap();
    let video = random_array::<f32>(&[3, 6], 1.0, 12);
    let seq = d.fuse(3, None, &v.encode("call Ravi")).unwrap();
    let run = |d: &IntentDecoder<f32>| {
        let mut g = Graph::new();
        let l = d.logits_all(d.stores(), &mut g, false, Some(&video), &seq).unwrap();
        g.value(l).clone()
    };
    let before = run(&d);
    d.attach_adapters(LoraConfig::default(), &mut rng(13)).unwrap();
    assert!(d.stores().adapters.is_some());
    assert_eq!(run(&d), before);
}

#[test]
fn stage_two_moves_only_projection_and_adapters() {
    contracts::stage_two_freeze();
}

#[test]
fn warmup_moves_only_the_base() {
    let data = toy_examples(4, 4, 12);
    let mut f = Finetuner::new(small_finetune(5, 3, 2), build_vocab(&data), 12).unwrap();
    let proj = f.decoder.projection.snapshot();
    let ad = f.decoder.adapters.snapshot();
    let base = f.decoder.base.snapshot();
    let intents: Vec<String> = data.iter().map(|e| e.intent.clone()).collect();
    f.lm_warmup(&intents, |_| {}).unwrap();
    assert_eq!(f.decoder.projection.snapshot(), proj);
    assert_eq!(f.decoder.adapters.snapshot(), ad);
    assert_ne!(f.decoder.base.snapshot(), base);
}

#[test]
fn non_finite_loss_aborts_before_update() {
    let data = toy_examples(2, 4, 12);
    let mut f = Finetuner::new(small_finetune(5, 0, 3), build_vocab(&data), 12).unwrap();
    let w = f.decoder.projection.find("proj.w").unwrap();
    let mut bad = f.decoder.projection.value(w).clone();
    bad.data_mut()[0] = f32::NAN;
    f.decoder.projection.get_mut(w).set_value(bad).unwrap();
    let before = (f.decoder.projection.snapshot(), f.decoder.adapters.snapshot());
    let err = f.train_step(&[&data[0]]).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)));
    let after = (f.decoder.projection.snapshot(), f.decoder.adapters.snapshot());
    // NaN != NaN, so compare bit patterns
    let bits = |s: &(Vec<Array<f32>>, Vec<Array<f32>>)| {
        s.0.iter().chain(&s.1).flat_map(|a| a.data().iter().map(|v| v.to_bits())).collect::<Vec<_>>()
    };
    assert_eq!(bits(&before), bits(&after));
    assert_eq!(f.schedule.step, 0);
}

#[test]
fn memorises_a_single_sample() {
    let data = toy_examples(1, 4, 12);
    let mut f = Finetuner::new(small_finetune(500, 100, 4), build_vocab(&data), 12).unwrap();
    f.lm_warmup(&[data[0].intent.clone()], |_| {}).unwrap();
    f.train(&data, 500, |_| {}).unwrap();
    let p = f.predict(&data[0], DecodeMode::Greedy).unwrap();
    assert_eq!(p.prediction, data[0].intent);
    assert_eq!(p.reference, data[0].intent);
    assert!(p.ocr_used);
}

#[test]
fn stage_two_loss_drops_on_toy_corpus() {
    let data = toy_examples(20, 4, 12);
    let mut f = Finetuner::new(small_finetune(300, 150, 5), build_vocab(&data), 12).unwrap();
    let intents: Vec<String> = data.iter().map(|e| e.intent.clone()).collect();
    f.lm_warmup(&intents, |_| {}).unwrap();
    let mean = |f: &Finetuner| data.iter().map(|e| f.example_loss(e).unwrap()).sum::<f64>() / data.len() as f64;
    let before = mean(&f);
    f.train(&data, 300, |_| {}).unwrap();
    let after = mean(&f);
    assert!(after < 0.8 * before, "{before} -> {after}");
}

#[test]
fn decoding_modes_and_token_filtering() {
    let data = toy_examples(3, 4, 12);
    let vocab = build_vocab(&data);
    let f = Finetuner::new(small_finetune(5, 0, 6), vocab.clone(), 12).unwrap();
    let d = &f.decoder;
    let ocr = encode_ocr(&vocab, &data[0].ocr);
    let greedy = d.generate(&data[0].video, Some(&ocr), DecodeMode::Greedy, 8, &mut rng(0)).unwrap();
    let zero = d.generate(&data[0].video, Some(&ocr), DecodeMode::Temperature(0.0), 8, &mut rng(1)).unwrap();
    assert_eq!(greedy, zero);
    for seed in 0..20 {
        let (text, _) = d.generate(&data[1].video, None, DecodeMode::Temperature(2.0), 8, &mut rng(seed)).unwrap();
        for w in text.split_whitespace() {
            assert!(!["<sep>", "<pad>", "<unk>", "<end>"].contains(&w), "{text}");
        }
    }
}

#[test]
fn checkpoint_restores_predictions() {
    let data = toy_examples(4, 4, 12);
    let mut f = Finetuner::new(small_finetune(10, 5, 7), build_vocab(&data), 12).unwrap();
    let intents: Vec<String> = data.iter().map(|e| e.intent.clone()).collect();
    f.lm_warmup(&intents, |_| {}).unwrap();
    f.train(&data, 10, |_| {}).unwrap();
    let bytes = f.to_checkpoint().unwrap().to_bytes();
    let g = Finetuner::from_checkpoint(&uijepa_core::checkpoint::Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(g.decoder.base.snapshot(), f.decoder.base.snapshot());
    assert_eq!(g.decoder.adapters.snapshot(), f.decoder.adapters.snapshot());
    assert_eq!(g.to_checkpoint().unwrap().to_bytes(), bytes);
    for e in &data {
        assert_eq!(g.predict(e, DecodeMode::Greedy).unwrap(), f.predict(e, DecodeMode::Greedy).unwrap());
    }
}

#[test]
fn ocr_toggle_controls_the_block() {
    let v = vocab();
    let ocr = v.encode("CALLING Ravi");
    for on in [true, false] {
        let opts = FusionOptions { ocr_enabled: on, ..Default::default() };
        let d = IntentDecoder::<f32>::new(tiny_config(), opts, v.clone(), 6, &mut rng(0)).unwrap();
        let seq = d.fuse(3, Some(&ocr), &v.encode("call Ravi")).unwrap();
        assert_eq!(seq.has_ocr(), on);
        assert_eq!(seq.video_slots, 3);
    }
}
