//! Evaluation metrics: ROUGE, sentence-embedding similarity and the
//! intent-similarity aggregate, correlations, silhouette and 2-D projection.

mod cluster;
mod stats;
mod text;

use serde::{Deserialize, Serialize};

pub use cluster::{pair_similarities, project_2d, silhouette, video_text_correlation};
pub use stats::{average_ranks, pearson, spearman};
pub use text::{cosine, lcs_len, rouge_l, rouge_n, tokenize, Embedding, HashedEmbedder, SentenceEmbedder};

/// How an embedding cosine in `[-1, 1]` is mapped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineNorm {
    /// `(c + 1) / 2`
    #[default]
    ShiftScale,
    /// `max(c, 0)`
    Clamp,
}

impl CosineNorm {
    pub fn apply(&self, c: f64) -> f64 {
        match self {
            CosineNorm::ShiftScale => (c + 1.0) / 2.0,
            CosineNorm::Clamp => c.max(0.0),
        }
    }
}

/// Raw similarity components of one prediction against its reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub cosine: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

impl Components {
    pub fn compute(prediction: &str, reference: &str, embedder: &dyn SentenceEmbedder) -> Self {
        Components {
            cosine: cosine(&embedder.embed(prediction).vector, &embedder.embed(reference).vector),
            rouge1: rouge_n(prediction, reference, 1),
            rouge2: rouge_n(prediction, reference, 2),
            rouge_l: rouge_l(prediction, reference),
        }
    }
}

/// Mean of the four components after mapping each to `[0, 1]`, times 100.
pub fn intent_similarity(c: &Components, norm: CosineNorm) -> f64 {
    (norm.apply(c.cosine) + c.rouge1 + c.rouge2 + c.rouge_l) / 4.0 * 100.0
}

/// Scores of a prediction set, each averaged over pairs and scaled to
/// `[0, 100]`. `sbert_like` is the normalised embedding cosine, so
/// `intent_sim` is the mean of the other four columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub sbert_like: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub intent_sim: f64,
    pub count: usize,
}

impl ScoreReport {
    /// Scores over `(prediction, reference)` pairs; an empty set scores 0.
    pub fn compute<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
        embedder: &dyn SentenceEmbedder,
        norm: CosineNorm,
    ) -> Self {
        let mut sums = [0.0; 4];
        let mut count = 0;
        for (p, r) in pairs {
            let c = Components::compute(p, r, embedder);
            for (s, v) in sums.iter_mut().zip([norm.apply(c.cosine), c.rouge1, c.rouge2, c.rouge_l]) {
                *s += v;
            }
            count += 1;
        }
        let mean = |s: f64| if count == 0 { 0.0 } else { 100.0 * s / count as f64 };
        let [s, r1, r2, rl] = sums.map(mean);
        ScoreReport { sbert_like: s, rouge1: r1, rouge2: r2, rouge_l: rl, intent_sim: (s + r1 + r2 + rl) / 4.0, count }
    }
}

/// Embedding-space diagnostics of an encoder over labelled clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingAnalysis {
    pub pearson: f64,
    pub spearman: f64,
    pub silhouette: f64,
    pub projection_2d: Vec<[f64; 2]>,
}

impl EmbeddingAnalysis {
    pub fn compute<L: Ord + Copy>(
        embeddings: &[Vec<f64>],
        labels: &[L],
        intents: &[String],
        embedder: &dyn SentenceEmbedder,
    ) -> crate::Result<Self> {
        let (pearson, spearman) = video_text_correlation(embeddings, intents, embedder)?;
        Ok(EmbeddingAnalysis {
            pearson,
            spearman,
            silhouette: silhouette(embeddings, labels)?,
            projection_2d: project_2d(embeddings)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intent_similarity_arithmetic() {
        let all = |c, r| Components { cosine: c, rouge1: r, rouge2: r, rouge_l: r };
        assert_eq!(intent_similarity(&all(1.0, 1.0), CosineNorm::ShiftScale), 100.0);
        assert_eq!(intent_similarity(&all(-1.0, 0.0), CosineNorm::ShiftScale), 0.0);
        assert_eq!(intent_similarity(&all(0.5, 0.5), CosineNorm::ShiftScale), 56.25);
        assert_eq!(intent_similarity(&all(-0.5, 0.0), CosineNorm::Clamp), 0.0);
    }

    #[test]
    fn report_of_identical_and_empty_sets() {
        let e = HashedEmbedder::default();
        let pairs = [("call Ravi", "call Ravi"), ("create alarm for 7:30 AM", "create alarm for 7:30 AM")];
        let r = ScoreReport::compute(pairs, &e, CosineNorm::ShiftScale);
        for v in [r.sbert_like, r.rouge1, r.rouge2, r.rouge_l, r.intent_sim] {
            assert!((v - 100.0).abs() < 1e-9);
        }
        let empty = ScoreReport::compute([("", "call Ravi")], &e, CosineNorm::ShiftScale);
        assert_eq!((empty.rouge1, empty.rouge2, empty.rouge_l), (0.0, 0.0, 0.0));
        assert_eq!(empty.sbert_like, 50.0);
        assert_eq!(ScoreReport::compute([], &e, CosineNorm::ShiftScale).count, 0);
    }
}
