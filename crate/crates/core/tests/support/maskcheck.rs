//! Seeded sweeps over the mask samplers, reporting every broken invariant.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uijepa_core::masking::{
    build_mask_set, sample_block_mask, sample_temporal_mask, BlockMaskConfig, MaskingConfig, TemporalMaskConfig,
    TemporalMode, COVERAGE_TOLERANCE,
};
use uijepa_core::video::GridDims;

/// Hyper-frames touched by a sorted index list, and whether each touched
/// hyper-frame is covered in full.
fn frames_of(indices: &[usize], dims: GridDims) -> (Vec<usize>, bool) {
    let s = dims.spatial();
    let mut frames: Vec<usize> = indices.iter().map(|i| i / s).collect();
    frames.dedup();
    let whole = indices.len() == frames.len() * s;
    (frames, whole)
}

/// Check one temporal draw; `None` when every property holds.
pub fn temporal_violation(cfg: &TemporalMaskConfig, dims: GridDims, seed: u64) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = match sample_temporal_mask(cfg, dims, &mut rng) {
        Ok(i) => i,
        Err(e) => return Some(format!("seed {seed}: {e}")),
    };
    let (frames, whole) = frames_of(&idx, dims);
    if frames.len() != cfg.masked_hyperframes {
        return Some(format!("seed {seed}: {} hyper-frames masked, wanted {}", frames.len(), cfg.masked_hyperframes));
    }
    if !whole || idx.windows(2).any(|w| w[0] >= w[1]) {
        return Some(format!("seed {seed}: partial or unsorted hyper-frame mask"));
    }
    if cfg.mode == TemporalMode::Contiguous && frames.windows(2).any(|w| w[1] != w[0] + 1) {
        return Some(format!("seed {seed}: contiguous mask has a gap: {frames:?}"));
    }
    None
}

/// Smallest gap between any rectangle that fits the grid and `area`.
pub fn nearest_area_gap(area: f64, dims: GridDims) -> f64 {
    let mut best = f64::INFINITY;
    for h in 1..=dims.h {
        for w in 1..=dims.w {
            best = best.min(((h * w) as f64 - area).abs());
        }
    }
    best
}

/// Check one block draw against its config; `None` when every property holds.
/// With `strict` off, a target no rectangle can reach within tolerance only
/// needs the nearest reachable area.
pub fn block_violation(cfg: &BlockMaskConfig, dims: GridDims, seed: u64, strict: bool) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = match sample_block_mask(cfg, dims, &mut rng) {
        Ok(m) => m,
        Err(e) => return Some(format!("seed {seed}: {e}")),
    };
    let target = cfg.spatial_scale * dims.spatial() as f64;
    let allowed = if strict { COVERAGE_TOLERANCE } else { COVERAGE_TOLERANCE.max(nearest_area_gap(target, dims)) };
    for b in &m.blocks {
        if (b.spatial_cells() as f64 - target).abs() > allowed + 1e-9 {
            return Some(format!("seed {seed}: block {b:?} misses target area {target}"));
        }
        if b.t0 + b.t_len > dims.t || b.h0 + b.h_len > dims.h || b.w0 + b.w_len > dims.w {
            return Some(format!("seed {seed}: block {b:?} leaves grid {dims:?}"));
        }
    }
    if m.indices.iter().any(|&i| i >= dims.len()) || m.indices.windows(2).any(|w| w[0] >= w[1]) {
        return Some(format!("seed {seed}: bad index list"));
    }
    None
}

/// Per-hyper-frame masking frequency of discrete mode with `k = T' - 2` on
/// an 8x2x2 grid, and the largest gap to `(T'-2)/T'`.
pub fn discrete_frequency_gap(draws: u64, base_seed: u64) -> f64 {
    let dims = GridDims::new(8, 2, 2);
    let cfg = TemporalMaskConfig { mode: TemporalMode::Discrete, masked_hyperframes: 6 };
    let mut hits = [0u64; 8];
    for d in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(d));
        for t in frames_of(&sample_temporal_mask(&cfg, dims, &mut rng).unwrap(), dims).0 {
            hits[t] += 1;
        }
    }
    hits.iter().map(|&h| (h as f64 / draws as f64 - 0.75).abs()).fold(0.0, f64::max)
}

/// Outcome of [`sweep`].
pub struct Sweep {
    pub checked: u64,
    pub violations: u64,
    /// The first few violations.
    pub examples: Vec<String>,
}

/// Every mask family over `draws` seeds on both grid sizes.
pub fn sweep(draws: u64, base_seed: u64, strict: bool) -> Sweep {    let grids = [GridDims::for_resolution(64), GridDims::for_resolution(384)];
    let temporal = [
        TemporalMaskConfig::from_scale(TemporalMode::Contiguous, 0.75, 8),
        TemporalMaskConfig::from_scale(TemporalMode::Discrete, 0.75, 8),
    ];
    let blocks = [BlockMaskConfig::SHORT_RANGE, BlockMaskConfig::LONG_RANGE];
    let mut out = Sweep { checked: 0, violations: 0, examples: Vec::new() };
    let note = |v: String, out: &mut Sweep| {
        out.violations += 1;
        if out.examples.len() < 5 {
            out.examples.push(v);
        }
    };
    for d in 0..draws {
        let seed = base_seed.wrapping_add(d);
        for &dims in &grids {
            let found = temporal
                .iter()
                .map(|c| temporal_violation(c, dims, seed))
                .chain(blocks.iter().map(|c| block_violation(c, dims, seed, strict)));
            for v in found.collect::<Vec<_>>() {
                out.checked += 1;
                if let Some(v) = v {
                    note(v, &mut out);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match build_mask_set(&MaskingConfig::default(), dims, &mut rng) {
                Ok(ms) if ms.groups.len() == 3 && ms.groups.iter().all(|g| g.indices.len() < dims.len()) => {}
                other => note(format!("seed {seed}: default mask set {other:?}"), &mut out),
            }
        }
    }
    out
}
