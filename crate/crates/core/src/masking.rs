//! Mask sampling over a token grid: multi-block spatio-temporal masks
//! (short- and long-range) and whole hyper-frame temporal masks.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::GridDims;

/// Allowed gap between a block's cell count and its target area.
pub const COVERAGE_TOLERANCE: f64 = 2.0;

const MAX_RESAMPLE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMaskConfig {
    pub num_blocks: usize,
    /// Fraction of the `H' x W'` plane covered by each block.
    pub spatial_scale: f64,
    /// Range of `height / width`.
    pub aspect_ratio: (f64, f64),
    /// Fraction of hyper-frames spanned by each block.
    pub temporal_scale: f64,
}

impl BlockMaskConfig {
    pub const SHORT_RANGE: BlockMaskConfig =
        BlockMaskConfig { num_blocks: 8, spatial_scale: 0.15, aspect_ratio: (0.75, 1.5), temporal_scale: 1.0 };
    pub const LONG_RANGE: BlockMaskConfig =
        BlockMaskConfig { num_blocks: 2, spatial_scale: 0.7, aspect_ratio: (0.75, 1.5), temporal_scale: 1.0 };

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.aspect_ratio;
        if !(self.spatial_scale > 0.0 && self.spatial_scale <= 1.0)
            || !(self.temporal_scale > 0.0 && self.temporal_scale <= 1.0)
            || !(lo > 0.0 && lo <= hi)
        {
            return Err(Error::contract(format!("invalid block mask config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalMode {
    /// One run of consecutive hyper-frames.
    Contiguous,
    /// Any hyper-frames, drawn without replacement.
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalMaskConfig {
    pub mode: TemporalMode,
    pub masked_hyperframes: usize,
}

impl TemporalMaskConfig {
    /// `k = ceil(scale * T')`.
    pub fn from_scale(mode: TemporalMode, temporal_scale: f64, hyperframes: usize) -> Self {
        let k = (temporal_scale * hyperframes as f64 - 1e-9).ceil().max(0.0) as usize;
        TemporalMaskConfig { mode, masked_hyperframes: k.min(hyperframes) }
    }
}

impl Default for TemporalMaskConfig {
    fn default() -> Self {
        TemporalMaskConfig { mode: TemporalMode::Discrete, masked_hyperframes: 6 }
    }
}

/// Extent of one sampled block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockExtent {
    pub t0: usize,
    pub t_len: usize,
    pub h0: usize,
    pub h_len: usize,
    pub w0: usize,
    pub w_len: usize,
}

impl BlockExtent {
    pub fn spatial_cells(&self) -> usize {
        self.h_len * self.w_len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMask {
    /// Sorted unique token indices covered by the union of blocks.
    pub indices: Vec<usize>,
    pub blocks: Vec<BlockExtent>,
}

/// Pick integer block sides for a target area and sampled aspect ratio.
///
/// Among side pairs whose cell count is within [`COVERAGE_TOLERANCE`] of the
/// target, prefer ratios inside the configured range and then the ratio
/// closest to the sampled one. Falls back to the closest area when no pair is
/// within tolerance.
fn block_sides(area: f64, ratio: f64, range: (f64, f64), dims: GridDims) -> (usize, usize) {
    let mut best: Option<((u8, f64, f64), (usize, usize))> = None;
    for h in 1..=dims.h {
        for w in 1..=dims.w {
            let err = ((h * w) as f64 - area).abs();
            let r = h as f64 / w as f64;
            let in_tol = err <= COVERAGE_TOLERANCE + 1e-9;
            let in_range = r >= range.0 - 1e-9 && r <= range.1 + 1e-9;
            let tier = match (in_tol, in_range) {
                (true, true) => 0,
                (true, false) => 1,
                _ => 2,
            };
            let aspect = (r.ln() - ratio.ln()).abs();
            let key = if tier == 2 { (tier, err, aspect) } else { (tier, aspect, err) };
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, (h, w)));
            }
        }
    }
    best.map(|(_, s)| s).unwrap_or((1, 1))
}

/// Union of `num_blocks` random blocks; deterministic given the generator.
pub fn sample_block_mask(cfg: &BlockMaskConfig, dims: GridDims, rng: &mut impl Rng) -> Result<BlockMask> {
    cfg.validate()?;
    let area = cfg.spatial_scale * dims.spatial() as f64;
    let t_len = ((cfg.temporal_scale * dims.t as f64 - 1e-9).ceil() as usize).min(dims.t);
    if area < 0.5 || t_len == 0 || dims.is_empty() {
        return Err(Error::contract(format!("block of scale {} does not fit grid {dims:?}", cfg.spatial_scale)));
    }
    let mut covered = BTreeSet::new();
    let mut blocks = Vec::with_capacity(cfg.num_blocks);
    for _ in 0..cfg.num_blocks {
        let (lo, hi) = cfg.aspect_ratio;
        let ratio = if hi > lo { (rng.gen_range(lo.ln()..=hi.ln())).exp() } else { lo };
        let (h_len, w_len) = block_sides(area, ratio, cfg.aspect_ratio, dims);
        let b = BlockExtent {
            t0: rng.gen_range(0..=dims.t - t_len),
            t_len,
            h0: rng.gen_range(0..=dims.h - h_len),
            h_len,
            w0: rng.gen_range(0..=dims.w - w_len),
            w_len,
        };
        for t in b.t0..b.t0 + b.t_len {
            for h in b.h0..b.h0 + b.h_len {
                for w in b.w0..b.w0 + b.w_len {
                    covered.insert((t * dims.h + h) * dims.w + w);
                }
            }
        }
        blocks.push(b);
    }
    Ok(BlockMask { indices: covered.into_iter().collect(), blocks })
}

/// Hyper-frames chosen for a temporal mask, sorted.
pub fn sample_temporal_frames(cfg: &TemporalMaskConfig, hyperframes: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let k = cfg.masked_hyperframes;
    if k > hyperframes {
        return Err(Error::contract(format!("cannot mask {k} of {hyperframes} hyper-frames")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut frames: Vec<usize> = match cfg.mode {
        TemporalMode::Contiguous => {
            let start = rng.gen_range(0..=hyperframes - k);
            (start..start + k).collect()
        }
        TemporalMode::Discrete => sample(rng, hyperframes, k).into_vec(),
    };
    frames.sort_unstable();
    Ok(frames)
}

/// Every spatial token of `k` chosen hyper-frames.
pub fn sample_temporal_mask(cfg: &TemporalMaskConfig, dims: GridDims, rng: &mut impl Rng) -> Result<Vec<usize>> {
    let frames = sample_temporal_frames(cfg, dims.t, rng)?;
    let s = dims.spatial();
    Ok(frames.iter().flat_map(|&t| t * s..(t + 1) * s).collect())
}

/// Which mask families are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSetting {
    Short,
    ShortLong,
    ShortLongTemporal,
}

impl MaskSetting {
    pub const ALL: [MaskSetting; 3] = [MaskSetting::Short, MaskSetting::ShortLong, MaskSetting::ShortLongTemporal];

    pub fn label(&self) -> &'static str {
        match self {
            MaskSetting::Short => "short",
            MaskSetting::ShortLong => "short+long",
            MaskSetting::ShortLongTemporal => "short+long+temporal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub setting: MaskSetting,
    pub short: BlockMaskConfig,
    pub long: BlockMaskConfig,
    pub temporal: TemporalMaskConfig,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            setting: MaskSetting::ShortLongTemporal,
            short: BlockMaskConfig::SHORT_RANGE,
            long: BlockMaskConfig::LONG_RANGE,
            temporal: TemporalMaskConfig::default(),
        }
    }
}

pub const GROUP_SHORT: &str = "short";
pub const GROUP_LONG: &str = "long";
pub const GROUP_TEMPORAL: &str = "temporal";

#[derive(Debug, Clone, PartialEq)]
pub struct MaskGroup {
    pub name: &'static str,
    /// Sorted unique masked token indices.
    pub indices: Vec<usize>,
}

/// Per-sample mask groups. Groups may overlap each other.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub groups: Vec<MaskGroup>,
    pub dims: GridDims,
}

impl MaskSet {
    pub fn group(&self, name: &str) -> Option<&MaskGroup> {
        self.groups.iter().find(|g| g.name == name)
    }
}

/// Block mask that leaves at least one token visible, resampling as needed.
fn sample_block_group(cfg: &BlockMaskConfig, dims: GridDims, rng: &mut impl Rng) -> Result<Vec<usize>> {
    for _ in 0..MAX_RESAMPLE {
        let m = sample_block_mask(cfg, dims, rng)?;
        if m.indices.len() < dims.len() {
            return Ok(m.indices);
        }
    }
    Err(Error::contract(format!("block config {cfg:?} always covers grid {dims:?}")))
}

/// Sample one group per enabled family, each independently.
pub fn build_mask_set(cfg: &MaskingConfig, dims: GridDims, rng: &mut impl Rng) -> Result<MaskSet> {
    let mut groups = vec![MaskGroup { name: GROUP_SHORT, indices: sample_block_group(&cfg.short, dims, rng)? }];
    if matches!(cfg.setting, MaskSetting::ShortLong | MaskSetting::ShortLongTemporal) {
        groups.push(MaskGroup { name: GROUP_LONG, indices: sample_block_group(&cfg.long, dims, rng)? });
    }
    if cfg.setting == MaskSetting::ShortLongTemporal {
        groups.push(MaskGroup { name: GROUP_TEMPORAL, indices: sample_temporal_mask(&cfg.temporal, dims, rng)? });
    }
    Ok(MaskSet { groups, dims })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub name: &'static str,
    pub masked: usize,
    pub fraction: f64,
    /// Masked token count per hyper-frame.
    pub per_hyperframe: Vec<usize>,
}

pub fn mask_statistics(ms: &MaskSet) -> Vec<GroupStats> {
    let total = ms.dims.len().max(1);
    ms.groups
        .iter()
        .map(|g| {
            let mut hist = vec![0; ms.dims.t];
            for &i in &g.indices {
                hist[i / ms.dims.spatial()] += 1;
            }
            GroupStats {
                name: g.name,
                masked: g.indices.len(),
                fraction: g.indices.len() as f64 / total as f64,
                per_hyperframe: hist,
            }
        })
        .collect()
}

/// Derived per-sample seed.
pub fn sample_seed(run_seed: u64, sample_index: u64) -> u64 {
    run_seed ^ sample_index
}
