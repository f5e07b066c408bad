use std::collections::HashMap;

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

fn f1(overlap: usize, cand: usize, reference: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    for w in tokens.windows(n) {
        *out.entry(w).or_insert(0) += 1;
    }
    out
}

/// ROUGE-N F1 over clipped n-gram counts.
///
/// When neither side has an n-gram the score is 1 if the token sequences
/// are equal (both empty, or the same single token for n = 2) and 0
/// otherwise; one side without n-grams scores 0.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be positive");
    let (c, r) = (tokenize(candidate), tokenize(reference));
    let (cn, rn) = (c.len().saturating_sub(n - 1), r.len().saturating_sub(n - 1));
    if cn == 0 || rn == 0 {
        return if cn == 0 && rn == 0 && c == r { 1.0 } else { 0.0 };
    }
    let (cg, rg) = (ngrams(&c, n), ngrams(&r, n));
    let overlap = cg.iter().map(|(g, &k)| k.min(rg.get(g).copied().unwrap_or(0))).sum();
    f1(overlap, cn, rn)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common token subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokenize(candidate), tokenize(reference));
    if c.is_empty() || r.is_empty() {
        return if c.is_empty() && r.is_empty() { 1.0 } else { 0.0 };
    }
    f1(lcs_len(&c, &r), c.len(), r.len())
}

/// A sentence embedding; `empty` marks text without tokens (zero vector).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub empty: bool,
}

pub trait SentenceEmbedder: Sync {
    fn embed(&self, text: &str) -> Embedding;
}

/// Unigrams and bigrams hashed (64-bit FNV-1a) into a fixed number of
/// buckets, term counts, L2-normalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashedEmbedder {
    pub dims: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        HashedEmbedder { dims: 512 }
    }
}

fn fnv1a(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, p) in parts.iter().enumerate() {
        let sep = if i == 0 { &b""[..] } else { &b" "[..] };
        for &b in sep.iter().chain(p.as_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

impl HashedEmbedder {
    /// Bucket of a unigram (`[w]`) or bigram (`[w1, w2]`) feature.
    pub fn bucket(&self, feature: &[&str]) -> usize {
        let tag = if feature.len() == 1 { "u" } else { "b" };
        let mut parts = vec![tag];
        parts.extend_from_slice(feature);
        (fnv1a(&parts) % self.dims as u64) as usize
    }
}

impl SentenceEmbedder for HashedEmbedder {
    fn embed(&self, text: &str) -> Embedding {
        let tokens = tokenize(text);
        let mut v = vec![0.0; self.dims];
        for t in &tokens {
            v[self.bucket(&[t])] += 1.0;
        }
        for w in tokens.windows(2) {
            v[self.bucket(&[&w[0], &w[1]])] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Embedding { vector: v, empty: tokens.is_empty() }
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine of vectors with different lengths");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}
