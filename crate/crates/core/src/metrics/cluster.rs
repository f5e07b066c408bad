use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::stats::{pearson, spearman};
use super::text::{cosine, SentenceEmbedder};
use crate::error::{Error, Result};

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map_or(0, Vec::len);
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::contract("points of different dimension"));
    }
    Ok(d)
}

/// Mean silhouette under the Euclidean metric. Points alone in their
/// cluster score 0, as does a point with `a = b = 0`.
pub fn silhouette<L: Ord + Copy>(points: &[Vec<f64>], labels: &[L]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::contract(format!("{} points, {} labels", points.len(), labels.len())));
    }
    check_points(points)?;
    let mut clusters: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        clusters.entry(l).or_default().push(i);
    }
    if clusters.len() < 2 {
        return Err(Error::contract("silhouette needs at least two clusters"));
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = &clusters[&labels[i]];
        if own.len() == 1 {
            continue;
        }
        let mean_dist =
            |members: &[usize]| members.iter().filter(|&&j| j != i).map(|&j| euclid(p, &points[j])).sum::<f64>();
        let a = mean_dist(own) / (own.len() - 1) as f64;
        let b = clusters
            .iter()
            .filter(|(l, _)| **l != labels[i])
            .map(|(_, m)| mean_dist(m) / m.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

/// Correlation between video and text similarity over every unordered pair:
/// cosine of the two video embeddings against cosine of the two intent
/// embeddings. Returns `(pearson, spearman)`.
pub fn video_text_correlation(
    videos: &[Vec<f64>],
    texts: &[String],
    embedder: &dyn SentenceEmbedder,
) -> Result<(f64, f64)> {
    if videos.len() != texts.len() {
        return Err(Error::contract(format!("{} videos, {} texts", videos.len(), texts.len())));
    }
    if videos.len() < 3 {
        return Err(Error::contract("video-text correlation needs at least three samples"));
    }
    check_points(videos)?;
    let t: Vec<Vec<f64>> = texts.iter().map(|s| embedder.embed(s).vector).collect();
    let (x, y) = pair_similarities(videos, &t);
    Ok((pearson(&x, &y)?, spearman(&x, &y)?))
}

/// Cosine similarities of every pair `i < j` in both spaces.
pub fn pair_similarities(a: &[Vec<f64>], b: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut x = Vec::with_capacity(n * (n - 1) / 2);
    let mut y = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            x.push(cosine(&a[i], &a[j]));
            y.push(cosine(&b[i], &b[j]));
        }
    }
    (x, y)
}

/// Coordinates on the top two principal components of the mean-centred
/// data. Each axis is signed so that its largest-magnitude coordinate is
/// positive. With fewer than two dimensions the missing axis is zero.
pub fn project_2d(points: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    if points.len() < 2 {
        return Err(Error::contract("projection needs at least two samples"));
    }
    let d = check_points(points)?;
    let n = points.len();
    let mean: Vec<f64> = (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, k| points[i][k] - mean[k]);
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut out = vec![[0.0; 2]; n];
    for (axis, &k) in order.iter().take(2).enumerate() {
        let coords = &x * eig.eigenvectors.column(k);
        let lead = coords.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for (o, c) in out.iter_mut().zip(coords.iter()) {
            o[axis] = sign * c;
        }
    }
    Ok(out)
}
