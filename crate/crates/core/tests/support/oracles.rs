//! Brute-force reference implementations for the evaluation metrics.
#![allow(dead_code)]

pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn f1(overlap: usize, c: usize, r: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    // harmonic mean written as 2·o / (c + r)
    2.0 * overlap as f64 / (c + r) as f64
}

/// Multiset intersection by repeated removal from the reference list.
pub fn rouge_n(cand: &str, reference: &str, n: usize) -> f64 {
    let (c, r) = (tokens(cand), tokens(reference));
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n { vec![] } else { (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect() }
    };
    let (cg, mut rg) = (grams(&c), grams(&r));
    if cg.is_empty() && rg.is_empty() {
        return if c == r { 1.0 } else { 0.0 };
    }
    if cg.is_empty() || rg.is_empty() {
        return 0.0;
    }
    let total = (cg.len(), rg.len());
    let mut overlap = 0;
    for g in &cg {
        if let Some(pos) = rg.iter().position(|x| x == g) {
            rg.swap_remove(pos);
            overlap += 1;
        }
    }
    f1(overlap, total.0, total.1)
}

fn is_subsequence(sub: &[&String], seq: &[String]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|s| it.any(|x| x == *s))
}

/// LCS length by enumerating every subsequence of the shorter side.
pub fn lcs_exhaustive(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "exhaustive LCS limited to 16 tokens");
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&String> = (0..short.len()).filter(|i| mask >> i & 1 == 1).map(|i| &short[i]).collect();
        if is_subsequence(&sub, long) {
            best = k;
        }
    }
    best
}

pub fn rouge_l(cand: &str, reference: &str) -> f64 {
    let (c, r) = (tokens(cand), tokens(reference));
    match (c.is_empty(), r.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => f1(lcs_exhaustive(&c, &r), c.len(), r.len()),
    }
}

/// Single-pass textbook formula n·Σxy − Σx·Σy over the root product.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Rank = number strictly below + (number equal + 1) / 2.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|u| *u < v).count() as f64;
            let equal = x.iter().filter(|u| *u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Spearman without ties: 1 − 6·Σd² / (n(n² − 1)).
pub fn spearman_no_ties(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Silhouette straight from a full distance matrix.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let dist: Vec<Vec<f64>> = points
        .iter()
        .map(|p| points.iter().map(|q| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect())
        .collect();
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |l: usize| {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == l && j != i).collect();
            (members.iter().map(|&j| dist[i][j]).sum::<f64>(), members.len())
        };
        let (sa, na) = mean_to(labels[i]);
        if na == 0 {
            continue;
        }
        let a = sa / na as f64;
        let mut b = f64::INFINITY;
        for &l in &distinct {
            if l != labels[i] {
                let (s, k) = mean_to(l);
                b = b.min(s / k as f64);
            }
        }
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

pub fn intent_similarity(cosine: f64, r1: f64, r2: f64, rl: f64) -> f64 {
    25.0 * ((cosine + 1.0) / 2.0 + r1 + r2 + rl)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uijepa_core::metrics as m;

const WORDS: &[&str] = &["open", "call", "Ravi", "alarm", "7", "30", "note", "the", "add", "to"];
const GLUE: &[&str] = &[" ", "  ", ", ", "-", ":", "! "];

/// Random text of at most `max_tokens` tokens over a small vocabulary so
/// overlaps and repeats are common.
pub fn random_text(rng: &mut ChaCha8Rng, max_tokens: usize) -> String {
    let n = rng.gen_range(0..=max_tokens);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(GLUE[rng.gen_range(0..GLUE.len())]);
        }
        s.push_str(WORDS[rng.gen_range(0..WORDS.len())]);
    }
    s
}

/// Random values on a coarse grid (ties are likely) or continuous.
pub fn random_values(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n).map(|_| if ties { rng.gen_range(0..5) as f64 } else { rng.gen_range(-3.0..3.0) }).collect()
}

/// Largest discrepancy between each metric and its oracle over `count`
/// random instances (≤ 12 tokens, ≤ 20 points).
pub fn max_oracle_errors(seed: u64, count: usize) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = vec![
        ("rouge1", 0.0f64),
        ("rouge2", 0.0),
        ("rougeL", 0.0),
        ("pearson", 0.0),
        ("spearman", 0.0),
        ("silhouette", 0.0),
        ("intent_similarity", 0.0),
    ];
    let mut bump = |k: usize, a: f64, b: f64| {
        let e = if a.is_nan() || b.is_nan() { f64::INFINITY } else { (a - b).abs() };
        worst[k].1 = worst[k].1.max(e);
    };
    for _ in 0..count {
        let (c, r) = (random_text(&mut rng, 12), random_text(&mut rng, 12));
        let (r1, r2, rl) = (m::rouge_n(&c, &r, 1), m::rouge_n(&c, &r, 2), m::rouge_l(&c, &r));
        bump(0, r1, rouge_n(&c, &r, 1));
        bump(1, r2, rouge_n(&c, &r, 2));
        bump(2, rl, rouge_l(&c, &r));

        let n = rng.gen_range(2..=20);
        let ties = rng.gen_bool(0.5);
        let (mut x, mut y) = (random_values(&mut rng, n, ties), random_values(&mut rng, n, ties));
        // constant sequences are undefined; nudge them
        for v in [&mut x, &mut y] {
            if v.iter().all(|a| *a == v[0]) {
                v[0] += 1.0;
            }
        }
        bump(3, m::pearson(&x, &y).unwrap(), pearson(&x, &y));
        bump(4, m::spearman(&x, &y).unwrap(), spearman(&x, &y));

        let k = rng.gen_range(2..=4);
        let dim = rng.gen_range(1..=4);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let points: Vec<Vec<f64>> = (0..n).map(|_| random_values(&mut rng, dim, ties)).collect();
        bump(5, m::silhouette(&points, &labels).unwrap(), silhouette(&points, &labels));

        let comps = m::Components { cosine: rng.gen_range(-1.0..=1.0), rouge1: r1, rouge2: r2, rouge_l: rl };
        bump(
            6,
            m::intent_similarity(&comps, m::CosineNorm::ShiftScale),
            intent_similarity(comps.cosine, r1, r2, rl),
        );
    }
    worst
}
