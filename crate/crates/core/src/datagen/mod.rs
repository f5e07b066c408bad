//! Synthetic labelled UI videos: per-intent screen graphs, goal-guided
//! traversal with detours, raster rendering and few-/zero-shot splits.

mod catalog;
mod font;
mod graph;
mod render;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use catalog::{build_graph, fill, format_time, sample_params, Category, Slot};
pub use font::{draw_text, glyph, is_drawable, read_text, supported_chars, wrap, ADVANCE, GLYPH_H, GLYPH_W};
pub use graph::{Edge, Row, ScreenSpec, Tap, Trace, UiGraph};
pub use render::{glyph_scale, line_chars, render_screen, render_trace, Layout, Rendered};

use crate::error::{Error, Result};
use crate::video::frame_file_name;

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    FewShotEval,
    ZeroShotEval,
}

/// One manifest record. `video_dir` is relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentSample {
    pub video_dir: String,
    pub frame_count: usize,
    pub category: Category,
    pub intent: String,
    pub ocr_final_frame: Vec<String>,
    pub split: Split,
}

impl IntentSample {
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(&self.video_dir)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Categories shared by train and few-shot eval.
    pub categories: Vec<Category>,
    pub per_category: usize,
    pub zero_shot: Vec<Category>,
    pub zero_shot_per_category: usize,
    /// Share of each seen category held out for few-shot eval (at least 2).
    pub few_shot_fraction: f64,
    pub res: usize,
    /// Each sample draws its detour count uniformly from `0..=max_noise_steps`.
    pub max_noise_steps: usize,
    /// Replace intents by their slot-free form.
    pub delexicalize: bool,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let zero_shot = vec![Category::CreateTimer, Category::EnableDoNotDisturb];
        DatasetConfig {
            categories: Category::ALL.into_iter().filter(|c| !zero_shot.contains(c)).collect(),
            per_category: 60,
            zero_shot,
            zero_shot_per_category: 10,
            few_shot_fraction: 0.2,
            res: 64,
            max_noise_steps: 2,
            delexicalize: false,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<Category> = self.categories.iter().chain(&self.zero_shot).copied().collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("a category is listed twice or in both seen and zero-shot sets"));
        }
        if !self.categories.is_empty() && self.per_category < 2 {
            return Err(Error::contract("few-shot eval needs at least 2 samples per category"));
        }
        if !(0.0..=1.0).contains(&self.few_shot_fraction) {
            return Err(Error::contract("few_shot_fraction must lie in [0, 1]"));
        }
        if self.res == 0 || self.res % 16 != 0 {
            return Err(Error::contract(format!("resolution {} is not a positive multiple of 16", self.res)));
        }
        Ok(())
    }

    /// Number of few-shot eval samples per seen category.
    pub fn few_shot_count(&self) -> usize {
        ((self.few_shot_fraction * self.per_category as f64).round() as usize).clamp(2, self.per_category)
    }

    /// (category, index within category, split) for every sample, in manifest order.
    pub fn plan(&self) -> Vec<(Category, usize, Split)> {
        let few = self.few_shot_count();
        let mut out = Vec::new();
        for &c in &self.categories {
            for i in 0..self.per_category {
                let split = if i + few >= self.per_category { Split::FewShotEval } else { Split::Train };
                out.push((c, i, split));
            }
        }
        for &c in &self.zero_shot {
            out.extend((0..self.zero_shot_per_category).map(|i| (c, i, Split::ZeroShotEval)));
        }
        out
    }
}

/// RNG for sample `index` of `category`: one ChaCha stream per sample.
pub fn sample_rng(seed: u64, category: Category, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((category.index() as u64) << 32) | index as u64);
    rng
}

/// A fully generated sample before it is written.
#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: UiGraph,
    pub trace: Trace,
    pub rendered: Rendered,
    pub intent: String,
}

pub fn generate_sample(category: Category, rng: &mut impl Rng, res: usize, max_noise: usize, delex: bool) -> Result<Generated> {
    let graph = build_graph(category, rng)?;
    let params = sample_params(&graph.slots, rng);
    let noise = rng.gen_range(0..=max_noise);
    let trace = graph.traverse(params, rng, noise)?;
    let rendered = render_trace(&graph, &trace, res)?;
    let intent =
        if delex { category.delexicalized_intent().to_string() } else { fill(&graph.intent_template, &trace.params) };
    Ok(Generated { graph, trace, rendered, intent })
}

pub fn write_frames(dir: &Path, rendered: &Rendered) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in rendered.frames.iter().enumerate() {
        f.write_ppm(&dir.join(frame_file_name(i)))?;
    }
    Ok(())
}

/// Generate every sample of `config` under `root` and write the manifest.
/// Samples are produced in parallel; each has its own RNG stream so the
/// output does not depend on scheduling.
pub fn build_dataset(config: &DatasetConfig, root: &Path) -> Result<Vec<IntentSample>> {
    config.validate()?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let plan = config.plan();
    let slots: Vec<Mutex<Option<Result<IntentSample>>>> = plan.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(plan.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(category, index, split)) = plan.get(k) else { break };
                let result = (|| {
                    let mut rng = sample_rng(config.seed, category, index);
                    let g = generate_sample(category, &mut rng, config.res, config.max_noise_steps, config.delexicalize)?;
                    let video_dir = format!("{}_{index:04}", category.name());
                    write_frames(&root.join(&video_dir), &g.rendered)?;
                    Ok(IntentSample {
                        video_dir,
                        frame_count: g.rendered.frames.len(),
                        category,
                        intent: g.intent,
                        ocr_final_frame: g.rendered.ocr_final_frame,
                        split,
                    })
                })();
                *slots[k].lock().unwrap() = Some(result);
            });
        }
    });
    let samples = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every planned sample is visited"))
        .collect::<Result<Vec<_>>>()?;
    write_manifest(&root.join(MANIFEST), &samples)?;
    Ok(samples)
}

pub fn write_manifest(path: &Path, samples: &[IntentSample]) -> Result<()> {
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<IntentSample>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

/// Check split hygiene of a loaded manifest: zero-shot categories appear in
/// no other split and every few-shot category has at least two samples.
pub fn check_splits(samples: &[IntentSample]) -> Result<()> {
    use std::collections::{BTreeMap, BTreeSet};
    let zero: BTreeSet<_> = samples.iter().filter(|s| s.split == Split::ZeroShotEval).map(|s| s.category).collect();
    if let Some(s) = samples.iter().find(|s| s.split != Split::ZeroShotEval && zero.contains(&s.category)) {
        return Err(Error::contract(format!("zero-shot category {} also in {:?}", s.category.name(), s.split)));
    }
    let mut few: BTreeMap<Category, usize> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.split == Split::FewShotEval) {
        *few.entry(s.category).or_default() += 1;
    }
    if let Some((c, n)) = few.iter().find(|(_, &n)| n < 2) {
        return Err(Error::contract(format!("few-shot category {} has {n} sample", c.name())));
    }
    Ok(())
}
