//! Ablation grids. Every cell trains the JEPA stage and the decoder from
//! its own config and is scored on the configured eval splits.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use clap::ValueEnum;

use serde::{Deserialize, Serialize};
use uijepa_core::datagen::Split;
use uijepa_core::jepa::{EncoderPair, JepaModel};
use uijepa_core::masking::{MaskSetting, TemporalMode};
use uijepa_core::video::{Augmentation, TokenGrid};

use crate::commands::{self, JepaLossRow, Run};
use crate::config::{RunConfig, DATA_FRACTIONS};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, Dataset};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_PLOT: &str = "sweep_plot.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    MaskingType,
    TemporalContiguous,
    TemporalDiscrete,
    DataFraction,
    Augmentation,
    Positional,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::MaskingType,
        Protocol::TemporalContiguous,
        Protocol::TemporalDiscrete,
        Protocol::DataFraction,
        Protocol::Augmentation,
        Protocol::Positional,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::MaskingType => "masking_type",
            Protocol::TemporalContiguous => "temporal_contiguous",
            Protocol::TemporalDiscrete => "temporal_discrete",
            Protocol::DataFraction => "data_fraction",
            Protocol::Augmentation => "augmentation",
            Protocol::Positional => "positional",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub config: RunConfig,
}

/// Hyper-frames per clip, the range of the temporal `k` sweep.
const HYPERFRAMES: usize = uijepa_core::video::NUM_FRAMES / uijepa_core::video::TUBELET;

/// The grid of `protocol` around `base`.
pub fn cells(protocol: Protocol, base: &RunConfig) -> Vec<Cell> {
    let with = |label: String, f: &dyn Fn(&mut RunConfig)| {
        let mut config = base.clone();
        f(&mut config);
        Cell { label, config }
    };
    match protocol {
        Protocol::MaskingType => MaskSetting::ALL
            .iter()
            .map(|&s| with(s.label().into(), &|c| c.jepa.mask_setting = s))
            .collect(),
        Protocol::TemporalContiguous | Protocol::TemporalDiscrete => {
            let mode =
                if protocol == Protocol::TemporalContiguous { TemporalMode::Contiguous } else { TemporalMode::Discrete };
            (0..=HYPERFRAMES)
                .map(|k| {
                    with(format!("k={k}"), &|c| {
                        c.jepa.mask_setting = MaskSetting::ShortLongTemporal;
                        c.jepa.temporal_mode = mode;
                        c.jepa.temporal_k = k;
                    })
                })
                .collect()
        }
        Protocol::DataFraction => {
            DATA_FRACTIONS.iter().map(|&f| with(format!("{f}"), &|c| c.jepa.data_fraction = f)).collect()
        }
        Protocol::Augmentation => [
            ("none", Augmentation { flip: false, crop: false }),
            ("flip", Augmentation { flip: true, crop: false }),
            ("crop", Augmentation { flip: false, crop: true }),
            ("flip+crop", Augmentation { flip: true, crop: true }),
        ]
        .iter()
        .map(|&(l, a)| with(l.into(), &|c| c.jepa.augmentation = a))
        .collect(),
        Protocol::Positional => [("off", false), ("on", true)]
            .iter()
            .map(|&(l, v)| with(l.into(), &|c| c.decoder.video_positions = v))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: String,
    pub cell: String,
    pub split: Split,
    #[serde(rename = "SBERT")]
    pub sbert: f64,
    #[serde(rename = "ROUGE-1")]
    pub rouge1: f64,
    #[serde(rename = "ROUGE-2")]
    pub rouge2: f64,
    #[serde(rename = "ROUGE-L")]
    pub rouge_l: f64,
    #[serde(rename = "IntentSim")]
    pub intent_sim: f64,
    pub jepa_final_loss: Option<f64>,
    /// The full cell config as JSON.
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlot {
    pub protocol: String,
    pub cells: Vec<String>,
    /// Intent similarity per split, one value per cell.
    pub intent_sim: BTreeMap<String, Vec<f64>>,
}

/// Per-cell rows, merged into the sweep CSV once every cell has run.
const CELL_ROWS: &str = "rows.json";

type EncoderCache = BTreeMap<String, (EncoderPair<f32>, Vec<JepaLossRow>)>;

fn cell_dir(n: usize, cell: &Cell) -> String {
    format!("cells/{n:02}_{}", sanitize(&cell.label))
}

/// Train and score cell `n`, writing its loss curve and rows under its cell
/// directory. Cells with the same seed and JEPA section share one encoder.
fn run_cell(run: &Run, data: &Dataset, protocol: Protocol, n: usize, cache: &mut EncoderCache) -> CliResult<()> {
    let cell = &cells(protocol, &run.config)[n];
    let cfg = &cell.config;
    let dir = crate::artifacts::RunDir::create(&run.out)?;
    let key = serde_json::to_string(&(cfg.seed, &cfg.jepa))?;
    if !cache.contains_key(&key) {
        let mut model = JepaModel::<f32>::new(cfg.jepa_config())?;
        let subset = pipeline::jepa_subset(&data.samples, cfg.jepa.data_fraction, cfg.seed);
        let clips: Vec<TokenGrid> = subset.iter().map(|&i| data.grids[i].clone()).collect();
        let mut losses = Vec::new();
        pipeline::train_jepa(cfg, &mut model, &clips, u64::MAX, |s, r| losses.push(JepaLossRow::new(s, r)))?;
        cache.insert(key.clone(), (model.pair, losses));
    }
    let (pair, losses) = &cache[&key];
    dir.write_csv(&format!("{}/jepa_loss.csv", cell_dir(n, cell)), losses)?;
    let grids: Vec<&TokenGrid> = data.grids.iter().collect();
    let samples: Vec<_> = data.samples.iter().collect();
    let examples = pipeline::decoder_examples(&samples, pipeline::token_features(pair, &grids, run.threads)?);
    let f = pipeline::train_decoder(cfg, &examples, pair.width(), |_, _| {})?;
    let cell_run = Run { config: cfg.clone(), ..run.clone() };
    let (metrics, _) = commands::evaluate(&cell_run, &f, pair, data, &cell.label)?;
    let config_json = serde_json::to_string(cfg)?;
    let rows: Vec<SweepRow> = metrics
        .into_iter()
        .map(|m| SweepRow {
            protocol: protocol.name().into(),
            cell: cell.label.clone(),
            split: m.split,
            sbert: m.sbert,
            rouge1: m.rouge1,
            rouge2: m.rouge2,
            rouge_l: m.rouge_l,
            intent_sim: m.intent_sim,
            jepa_final_loss: losses.last().map(|r| r.loss),
            config: config_json.clone(),
        })
        .collect();
    dir.write_json(&format!("{}/{CELL_ROWS}", cell_dir(n, cell)), &rows)?;
    Ok(())
}

/// Run one cell only; used by the child processes of a parallel sweep.
pub fn run_single_cell(run: &Run, dataset: &Path, protocol: Protocol, n: usize) -> CliResult<()> {
    let count = cells(protocol, &run.config).len();
    if n >= count {
        return Err(CliError::Config(format!("cell {n} out of range: {} has {count} cells", protocol.name())));
    }
    let data = Dataset::load(dataset, run.config.dataset.res, run.threads)?;
    run_cell(run, &data, protocol, n, &mut BTreeMap::new())
}

/// Run cells `todo` as child processes of the current executable, at most
/// `jobs` at a time.
fn spawn_cells(run: &Run, dataset: &Path, protocol: Protocol, todo: &[usize], jobs: usize) -> CliResult<()> {
    let exe = std::env::current_exe()?;
    let config = run.out.join(crate::artifacts::CONFIG_RESOLVED);
    let proto = protocol.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    for batch in todo.chunks(jobs) {
        let mut children = Vec::new();
        for &n in batch {
            let child = Command::new(&exe)
                .arg("sweep")
                .arg("--dataset")
                .arg(dataset)
                .args(["--protocol", proto.as_str(), "--cell", &n.to_string(), "--threads", "1"])
                .arg("--config")
                .arg(&config)
                .arg("--out")
                .arg(&run.out)
                .spawn()?;
            children.push((n, child));
        }
        for (n, mut child) in children {
            let status = child.wait()?;
            if !status.success() {
                return Err(match status.code() {
                    Some(2) => CliError::Config(format!("sweep cell {n} failed")),
                    Some(3) => CliError::Data(format!("sweep cell {n} failed")),
                    Some(4) => CliError::Numeric(format!("sweep cell {n} failed")),
                    _ => CliError::Internal(format!("sweep cell {n} failed with {status}")),
                });
            }
        }
    }
    Ok(())
}

/// Run every cell of `protocol` and merge the rows. With `jobs > 1` the
/// cells run in separate processes; outputs are identical either way.
pub fn run_sweep(run: &Run, dataset: &Path, protocol: Protocol, jobs: usize) -> CliResult<Vec<SweepRow>> {
    let dir = crate::artifacts::RunDir::create(&run.out)?;
    dir.echo_config(&run.config_text, &run.config)?;
    let grid = cells(protocol, &run.config);
    let todo: Vec<usize> = (0..grid.len()).collect();
    if jobs > 1 {
        spawn_cells(run, dataset, protocol, &todo, jobs)?;
    } else {
        let data = Dataset::load(dataset, run.config.dataset.res, run.threads)?;
        let mut cache = EncoderCache::new();
        for &n in &todo {
            run_cell(run, &data, protocol, n, &mut cache)?;
        }
    }
    let mut rows = Vec::new();
    for (n, cell) in grid.iter().enumerate() {
        let text = std::fs::read_to_string(dir.path(&format!("{}/{CELL_ROWS}", cell_dir(n, cell))))?;
        rows.extend(serde_json::from_str::<Vec<SweepRow>>(&text)?);
    }
    let mut plot = SweepPlot {
        protocol: protocol.name().into(),
        cells: grid.iter().map(|c| c.label.clone()).collect(),
        intent_sim: BTreeMap::new(),
    };
    for r in &rows {
        plot.intent_sim.entry(split_name(r.split)).or_default().push(r.intent_sim);
    }
    dir.write_csv(SWEEP_CSV, &rows)?;
    dir.write_json(SWEEP_PLOT, &plot)?;
    dir.seal()?;
    Ok(rows)
}

fn split_name(s: Split) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}
