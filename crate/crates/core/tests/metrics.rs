#[path = "support/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use uijepa_core::metrics::*;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

#[test]
fn every_metric_matches_its_oracle_on_random_instances() {
    for (name, err) in oracles::max_oracle_errors(11, 200) {
        assert!(err <= 1e-9, "{name}: max deviation {err:e}");
    }
}

#[test]
fn lcs_dp_agrees_with_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let a = oracles::tokens(&oracles::random_text(&mut rng, 12));
        let b = oracles::tokens(&oracles::random_text(&mut rng, 12));
        assert_eq!(lcs_len(&a, &b), oracles::lcs_exhaustive(&a, &b));
    }
}

#[test]
fn hand_examples() {
    let c = "the user checks weather";
    let r = "user checks the weather app";
    assert!((rouge_n(c, r, 1) - 8.0 / 9.0).abs() < 1e-12);
    assert!((oracles::rouge_n(c, r, 1) - 8.0 / 9.0).abs() < 1e-12);
    assert!((rouge_l("open maps now", "now maps open") - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(rouge_l("", "x"), 0.0);
    assert_eq!(rouge_l("x", ""), 0.0);

    let (x, y) = ([1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 4.0, 3.0]);
    assert!((spearman(&x, &y).unwrap() - 0.6).abs() < 1e-12);
    assert!((oracles::spearman_no_ties(&x, &y) - 0.6).abs() < 1e-12);
    let exp: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
    assert!((spearman(&x, &exp).unwrap() - 1.0).abs() < 1e-12);
    assert!(spearman(&x, &[5.0; 4]).is_err());

    let comps = Components { cosine: 0.5, rouge1: 0.5, rouge2: 0.5, rouge_l: 0.5 };
    assert!((intent_similarity(&comps, CosineNorm::ShiftScale) - 56.25).abs() < 1e-12);
}

#[test]
fn silhouette_hand_instance_and_conventions() {
    // points on a line: cluster 0 = {0, 1}, cluster 1 = {4, 6}
    let pts = vec![vec![0.0], vec![1.0], vec![4.0], vec![6.0]];
    let labels = [0, 0, 1, 1];
    let s = [(5.0 - 1.0) / 5.0, (4.0 - 1.0) / 4.0, (3.5 - 2.0) / 3.5, (5.5 - 2.0) / 5.5];
    let want = s.iter().sum::<f64>() / 4.0;
    assert!((silhouette(&pts, &labels).unwrap() - want).abs() < 1e-12);
    assert!((oracles::silhouette(&pts, &labels) - want).abs() < 1e-12);

    let same = vec![vec![1.0, 2.0]; 4];
    assert_eq!(silhouette(&same, &labels).unwrap(), 0.0);
    assert!(silhouette(&pts, &[0, 0, 0, 0]).is_err());
    assert!(silhouette(&pts, &[0, 0, 1]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut far = Vec::new();
    let mut far_labels = Vec::new();
    for c in 0..2 {
        for _ in 0..10 {
            far.push(vec![c as f64 * 1000.0 + rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]);
            far_labels.push(c);
        }
    }
    assert!(silhouette(&far, &far_labels).unwrap() > 0.99);

    // singleton points count toward the mean with score 0
    let pts = vec![vec![0.0], vec![0.1], vec![10.0]];
    let got = silhouette(&pts, &[0, 0, 1]).unwrap();
    assert!((got - oracles::silhouette(&pts, &[0, 0, 1])).abs() < 1e-12);
    assert!(got < 1.0 && got > 0.6);
}

#[test]
fn embedder_is_collision_free_on_the_intent_vocabulary() {
    use uijepa_core::datagen::{Category, Slot};
    let e = HashedEmbedder::default();
    let mut words = std::collections::BTreeSet::new();
    for c in Category::ALL {
        words.extend(tokenize(c.intent_template()));
    }
    for s in Slot::ALL {
        for v in s.table().iter().take(20) {
            words.extend(tokenize(v));
        }
    }
    let mut seen: BTreeMap<usize, &String> = BTreeMap::new();
    let mut collisions = Vec::new();
    for w in &words {
        if let Some(prev) = seen.insert(e.bucket(&[w]), w) {
            collisions.push((prev.clone(), w.clone()));
        }
    }
    // a 512-bucket table cannot hold an unbounded vocabulary; the corpus used
    // for the disjointness check below must be collision-free
    let corpus = ["call Ravi", "create alarm for 7 AM", "open notes folder", "send message hello to Mia"];
    let mut buckets: BTreeMap<usize, String> = BTreeMap::new();
    for text in corpus {
        let t = tokenize(text);
        let mut feats: Vec<Vec<&str>> = t.iter().map(|w| vec![w.as_str()]).collect();
        feats.extend(t.windows(2).map(|w| vec![w[0].as_str(), w[1].as_str()]));
        for f in feats {
            let key = f.join(" ");
            if let Some(prev) = buckets.insert(e.bucket(&f), key.clone()) {
                assert_eq!(prev, key, "hash collision between {prev:?} and {key:?}");
            }
        }
    }
    for (i, a) in corpus.iter().enumerate() {
        for b in &corpus[i + 1..] {
            let (va, vb) = (e.embed(a), e.embed(b));
            assert_eq!(cosine(&va.vector, &vb.vector), 0.0, "{a:?} vs {b:?}");
            assert_eq!(cosine(&va.vector, &vb.vector), cosine(&vb.vector, &va.vector));
        }
        let v = e.embed(a);
        assert!((cosine(&v.vector, &v.vector) - 1.0).abs() < 1e-12);
        assert!(!v.empty);
    }
    assert!(collisions.len() < words.len() / 4, "{} collisions over {} words", collisions.len(), words.len());
}

#[test]
fn video_text_correlation_identity_and_null() {
    let e = HashedEmbedder::default();
    let texts: Vec<String> = ["call Ravi", "call Mia", "create alarm for 7 AM", "create note list in folder work", "call Ravi now"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let videos: Vec<Vec<f64>> = texts.iter().map(|t| e.embed(t).vector).collect();
    let (p, s) = video_text_correlation(&videos, &texts, &e).unwrap();
    assert!((p - 1.0).abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
    let (x, _) = pair_similarities(&videos, &videos);
    assert_eq!(x.len(), 5 * 4 / 2);
    assert!(video_text_correlation(&videos[..2], &texts[..2], &e).is_err());

    // random video embeddings: 46 clips give 1035 pairs
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let words = ["call", "Ravi", "alarm", "note", "add", "stock", "timer", "open", "Mia", "work"];
    let texts: Vec<String> = (0..46)
        .map(|_| (0..4).map(|_| words[rng.gen_range(0..words.len())]).collect::<Vec<_>>().join(" "))
        .collect();
    let mut passed = false;
    for _attempt in 0..3 {
        let videos = gaussian(&mut rng, 46, 32);
        let (p, _) = video_text_correlation(&videos, &texts, &e).unwrap();
        if p.abs() < 0.1 {
            passed = true;
            break;
        }
    }
    assert!(passed, "random embeddings correlated with text in 3 attempts");
}

fn pairwise(points: &[[f64; 2]]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            out.push(((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt());
        }
    }
    out
}

fn residual(points: &[Vec<f64>], proj: &[[f64; 2]], comps: usize) -> f64 {
    // total variance minus the variance captured by the first `comps` axes
    let n = points.len() as f64;
    let d = points[0].len();
    let mean: Vec<f64> = (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n).collect();
    let total: f64 = points.iter().map(|p| p.iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>()).sum();
    let kept: f64 = proj.iter().map(|q| (0..comps).map(|c| q[c] * q[c]).sum::<f64>()).sum();
    total - kept
}

#[test]
fn projection_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let flat = gaussian(&mut rng, 12, 2);
    let n = flat.len() as f64;
    let mean = [flat.iter().map(|p| p[0]).sum::<f64>() / n, flat.iter().map(|p| p[1]).sum::<f64>() / n];
    let centred: Vec<[f64; 2]> = flat.iter().map(|p| [p[0] - mean[0], p[1] - mean[1]]).collect();
    let proj = project_2d(&flat).unwrap();
    for (a, b) in pairwise(&centred).iter().zip(pairwise(&proj)) {
        assert!((a - b).abs() < 1e-9);
    }

    let dir = [0.3, -1.2, 0.5, 2.0];
    let line: Vec<Vec<f64>> = (0..10).map(|i| dir.iter().map(|d| d * (i as f64 - 3.7)).collect()).collect();
    let proj = project_2d(&line).unwrap();
    assert!(proj.iter().all(|p| p[1].abs() < 1e-9));
    let lead = proj.iter().map(|p| p[0]).fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    assert!(lead > 0.0);

    let cloud = gaussian(&mut rng, 30, 6);
    let proj = project_2d(&cloud).unwrap();
    let (r1, r2) = (residual(&cloud, &proj, 1), residual(&cloud, &proj, 2));
    assert!(r2 <= r1 + 1e-9 && r2 >= -1e-9);
    assert_eq!(project_2d(&cloud).unwrap(), proj);
    assert!(project_2d(&cloud[..1]).is_err());
}

#[test]
fn embedding_analysis_ranges() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = HashedEmbedder::default();
    let emb = gaussian(&mut rng, 12, 8);
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let intents: Vec<String> = labels.iter().map(|l| format!("intent {l}")).collect();
    let a = EmbeddingAnalysis::compute(&emb, &labels, &intents, &e).unwrap();
    for v in [a.pearson, a.spearman, a.silhouette] {
        assert!((-1.0..=1.0).contains(&v));
    }
    assert_eq!(a.projection_2d.len(), 12);
}

fn rotate(points: &[Vec<f64>], angle: f64, shift: [f64; 2], scale: f64) -> Vec<Vec<f64>> {
    let (s, c) = angle.sin_cos();
    points.iter().map(|p| vec![scale * (c * p[0] - s * p[1]) + shift[0], scale * (s * p[0] + c * p[1]) + shift[1]]).collect()
}

fn text_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!["call", "Ravi", "alarm", "7", "note", "the"]), 0..10)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn rouge_is_one_on_identical_inputs(t in text_strategy()) {
        prop_assert_eq!(rouge_n(&t, &t, 1), 1.0);
        prop_assert_eq!(rouge_n(&t, &t, 2), 1.0);
        prop_assert_eq!(rouge_l(&t, &t), 1.0);
    }

    #[test]
    fn rouge1_never_drops_when_matched_tokens_are_appended(c in text_strategy(), r in text_strategy(), extra in text_strategy()) {
        let before = rouge_n(&c, &r, 1);
        let after = rouge_n(&format!("{c} {extra}"), &format!("{r} {extra}"), 1);
        prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
    }

    #[test]
    fn rouge_scores_stay_in_unit_interval(c in text_strategy(), r in text_strategy()) {
        for v in [rouge_n(&c, &r, 1), rouge_n(&c, &r, 2), rouge_l(&c, &r)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn intent_similarity_increases_in_every_component(
        base in prop::array::uniform4(0.0f64..0.9), k in 0usize..4, delta in 0.001f64..0.1
    ) {
        let mk = |v: [f64; 4]| Components { cosine: 2.0 * v[0] - 1.0, rouge1: v[1], rouge2: v[2], rouge_l: v[3] };
        let mut up = base;
        up[k] += delta;
        let norm = CosineNorm::ShiftScale;
        prop_assert!(intent_similarity(&mk(up), norm) > intent_similarity(&mk(base), norm));
    }

    #[test]
    fn silhouette_is_invariant_to_rigid_motion_and_scale(
        seed in any::<u64>(), angle in 0.0f64..6.3, tx in -50.0f64..50.0, ty in -50.0f64..50.0, scale in 0.1f64..10.0
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = gaussian(&mut rng, 15, 2);
        let labels: Vec<usize> = (0..15).map(|i| i % 3).collect();
        let a = silhouette(&pts, &labels).unwrap();
        let b = silhouette(&rotate(&pts, angle, [tx, ty], scale), &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn spearman_is_invariant_to_monotone_transforms(seed in any::<u64>(), n in 3usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = oracles::random_values(&mut rng, n, false);
        let y = oracles::random_values(&mut rng, n, false);
        let tx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let ty: Vec<f64> = y.iter().map(|v| (v / 2.0).exp()).collect();
        prop_assert!((spearman(&x, &y).unwrap() - spearman(&tx, &ty).unwrap()).abs() < 1e-12);
    }
}
