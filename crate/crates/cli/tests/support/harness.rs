//! Shared helpers for driving the CLI end to end on tiny configs.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Small enough that a full datagen → jepa → decoder → eval run takes a
/// couple of seconds.
pub const TINY: &str = r#"seed = 3

[dataset]
per_category = 4
zero_shot_per_category = 2

[jepa]
iterations = 4
batch_size = 2
encoder = { depth = 1, width = 32, heads = 2, mlp_ratio = 2.0 }
predictor = { depth = 1, width = 16, heads = 2, mlp_ratio = 2.0 }
schedule = { warmup = 1 }

[decoder]
depth = 1
width = 32
heads = 2
lora_rank = 2
lm_steps = 3
iterations = 3
schedule = { warmup = 1 }
max_new_tokens = 6

[eval]
max_samples = 3
"#;

/// Run the CLI in-process, quietly, and return its exit code.
pub fn uijepa(args: &[&str]) -> i32 {
    uijepa_cli::run_with_args(std::iter::once("uijepa").chain(args.iter().copied())).0
}

/// Run the CLI and panic unless it exits 0.
pub fn ok(args: &[&str]) {
    let (code, msg) = uijepa_cli::run_with_args(std::iter::once("uijepa").chain(args.iter().copied()));
    assert_eq!(code, 0, "uijepa {args:?}: {msg}");
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Relative path → bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Paths of a full tiny pipeline run under `base`.
pub struct Pipeline {
    pub config: PathBuf,
    pub data: PathBuf,
    pub jepa: PathBuf,
    pub decoder: PathBuf,
    pub eval: PathBuf,
}

/// datagen, jepa-tune, decode-tune (tuned encoder) and eval with `config_text`.
pub fn full_pipeline(base: &Path, config_text: &str) -> Pipeline {
    let p = Pipeline {
        config: write_config(base, "run.toml", config_text),
        data: base.join("data"),
        jepa: base.join("jepa"),
        decoder: base.join("decoder"),
        eval: base.join("eval"),
    };
    let c = s(&p.config);
    ok(&["--config", c, "--out", s(&p.data), "datagen"]);
    ok(&["--config", c, "--out", s(&p.jepa), "jepa-tune", "--dataset", s(&p.data)]);
    let ck = p.jepa.join("jepa.uij");
    ok(&["--config", c, "--out", s(&p.decoder), "decode-tune", "--dataset", s(&p.data), "--encoder", s(&ck)]);
    let model = p.decoder.join("model.uij");
    ok(&["--config", c, "--out", s(&p.eval), "eval", "--dataset", s(&p.data), "--model", s(&model)]);
    p
}
