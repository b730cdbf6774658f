//! Configuration resolution: command-line flags over a config document over
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use m3_core::datasets::Composition;
use m3_core::harness::{Selection, TrainConfig};
use m3_core::predictor::{FeatureSource, Pooling, PredictorConfig};
use m3_core::protocol::Aspect;
use m3_core::xlstm::BlockLayout;
use serde::de::DeserializeOwned;

use crate::UsageError;

/// Names accepted by `--config` in place of a file.
pub const PRESETS: [&str; 3] = ["default", "tiny", "synthetic"];

/// Width used by the `synthetic` preset, matching `gen-fixtures` defaults.
const SYNTH_WIDTH: usize = 64;

pub fn preset(name: &str) -> Option<TrainConfig> {
    match name {
        "default" => Some(TrainConfig::default()),
        "tiny" => Some(TrainConfig { predictor: PredictorConfig::tiny(), ..TrainConfig::default() }),
        "synthetic" => Some(TrainConfig::synthetic(SYNTH_WIDTH)),
        _ => None,
    }
}

/// Parses a JSON or TOML document, picked by extension; unknown extensions
/// try JSON first.
pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let parsed: Result<T, String> = match ext.as_str() {
        "toml" => toml::from_str(&text).map_err(|e| e.to_string()),
        "json" => serde_json::from_str(&text).map_err(|e| e.to_string()),
        _ => serde_json::from_str(&text).or_else(|je| toml::from_str(&text).map_err(|te| format!("{je}; as TOML: {te}"))),
    };
    parsed.map_err(|e| UsageError(format!("malformed config {}: {e}", path.display())).into())
}

/// The `--config` value, a preset name or a document path.
pub fn base_config(spec: Option<&str>) -> Result<TrainConfig> {
    match spec {
        None => Ok(TrainConfig::default()),
        Some(s) => match preset(s) {
            Some(c) => Ok(c),
            None => read_document(Path::new(s)).with_context(|| format!("loading --config {s}")),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for Width {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Width::Auto),
            n => n.parse().map(Width::Fixed).map_err(|_| format!("expected a width or 'auto', got '{n}'")),
        }
    }
}

/// `4:1:0` style ratios, train : test : validation.
pub fn parse_ratios(s: &str) -> std::result::Result<[u32; 3], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected train:test:val, got '{s}'"));
    }
    let mut out = [0u32; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.trim().parse().map_err(|_| format!("bad ratio '{p}'"))?;
    }
    if out.iter().all(|&r| r == 0) {
        return Err("split ratios sum to zero".into());
    }
    Ok(out)
}

fn parse_selection(s: &str) -> std::result::Result<Selection, String> {
    match s {
        "best_val_srcc" | "best" => Ok(Selection::BestValSrcc),
        "last_epoch" | "last" => Ok(Selection::LastEpoch),
        other => Err(format!("unknown selection '{other}' (best_val_srcc, last_epoch)")),
    }
}

/// Training overrides shared by train, cross-eval and ablate.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Scored aspect: quality, correspondence or authenticity
    #[arg(long)]
    pub aspect: Option<Aspect>,
    /// Conversation composition of the fixtures: with_desc, full_conv or no_desc
    #[arg(long)]
    pub composition: Option<Composition>,
    /// Training epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// AdamW learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// AdamW decoupled weight decay
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Gradient-norm ceiling; 0 disables clipping
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Split ratios train:test:val, e.g. 4:1:0
    #[arg(long, value_parser = parse_ratios)]
    pub split: Option<[u32; 3]>,
    /// Percent of train held out for validation when the split has none
    #[arg(long)]
    pub carve_val: Option<u32>,
    /// Checkpoint selection: best_val_srcc or last_epoch
    #[arg(long, value_parser = parse_selection)]
    pub selection: Option<Selection>,
    /// Input row width, or 'auto' to take it from the fixtures
    #[arg(long)]
    pub d_vocab: Option<Width>,
    /// Hidden width
    #[arg(long)]
    pub d_h: Option<usize>,
    /// Block layout, e.g. m,s,m,m (empty string for none)
    #[arg(long)]
    pub layout: Option<BlockLayout>,
    /// mLSTM heads
    #[arg(long)]
    pub heads: Option<usize>,
    /// Sequence pooling: mean, max, fl_mean or last
    #[arg(long)]
    pub pooling: Option<Pooling>,
    /// Skip the xLSTM stack
    #[arg(long)]
    pub bypass_xlstm: bool,
    /// Input features: logits or hidden_states
    #[arg(long)]
    pub feature_source: Option<FeatureSource>,
}

/// Applies flags on top of `cfg`. Returns whether the input width should be
/// inferred from the data.
pub fn apply_flags(cfg: &mut TrainConfig, f: &TrainFlags, seed: Option<u64>) -> bool {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(a) = f.aspect {
        cfg.aspect = a;
    }
    if let Some(c) = f.composition {
        cfg.composition = c;
    }
    if let Some(e) = f.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = f.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = f.lr {
        cfg.optimizer.lr = lr;
    }
    if let Some(wd) = f.weight_decay {
        cfg.optimizer.weight_decay = wd;
    }
    if let Some(c) = f.clip_norm {
        cfg.clip_norm = (c != 0.0).then_some(c);
    }
    if let Some(r) = f.split {
        cfg.split_ratios = Some(r);
    }
    if let Some(p) = f.carve_val {
        cfg.carve_val_percent = p;
    }
    if let Some(s) = f.selection {
        cfg.selection = s;
    }
    let p = &mut cfg.predictor;
    if let Some(Width::Fixed(w)) = f.d_vocab {
        p.d_vocab = w;
    }
    if let Some(d) = f.d_h {
        p.d_h = d;
    }
    if let Some(l) = &f.layout {
        p.layout = l.clone();
    }
    if let Some(h) = f.heads {
        p.heads = h;
    }
    if let Some(pl) = f.pooling {
        p.pooling = pl;
    }
    if f.bypass_xlstm {
        p.bypass_xlstm = true;
    }
    if let Some(fs) = f.feature_source {
        p.feature_source = fs;
    }
    f.d_vocab == Some(Width::Auto)
}

/// Loads `--config` and applies the flags.
pub fn resolve(spec: Option<&str>, flags: &TrainFlags, seed: Option<u64>) -> Result<(TrainConfig, bool)> {
    let mut cfg = base_config(spec)?;
    let auto = apply_flags(&mut cfg, flags, seed);
    Ok((cfg, auto))
}

/// Directory for a command's artifacts: `--out` when given, otherwise a fresh
/// `<timestamp>-seed<seed>` directory under `$M3_RUN_ROOT` (default `runs`).
pub fn run_dir(out: Option<&Path>, seed: u64) -> Result<PathBuf> {
    if let Some(p) = out {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
        return Ok(p.to_path_buf());
    }
    let root = std::env::var_os("M3_RUN_ROOT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{stamp}-seed{seed}");
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "epochs = 7\nbatch_size = 4\n[predictor]\nd_h = 16\n").unwrap();
        let flags = TrainFlags { epochs: Some(3), ..TrainFlags::default() };
        let (cfg, auto) = resolve(Some(path.to_str().unwrap()), &flags, Some(9)).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.batch_size, 4);
        assert_eq!(cfg.predictor.d_h, 16);
        assert_eq!(cfg.predictor.d_vocab, TrainConfig::default().predictor.d_vocab);
        assert_eq!(cfg.seed, 9);
        assert!(!auto);
    }

    #[test]
    fn json_documents_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("c.json");
        std::fs::write(&good, r#"{"epochs": 2, "split_ratios": [3, 1, 0]}"#).unwrap();
        let cfg = base_config(Some(good.to_str().unwrap())).unwrap();
        assert_eq!((cfg.epochs, cfg.split_ratios), (2, Some([3, 1, 0])));
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"epoch": 2}"#).unwrap();
        let err = base_config(Some(bad.to_str().unwrap())).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn ratios_and_widths() {
        assert_eq!(parse_ratios("7:2:1"), Ok([7, 2, 1]));
        assert!(parse_ratios("0:0:0").is_err());
        assert!(parse_ratios("4:1").is_err());
        assert_eq!("auto".parse::<Width>(), Ok(Width::Auto));
        assert_eq!("64".parse::<Width>(), Ok(Width::Fixed(64)));
    }

    #[test]
    fn run_dirs_are_unique() {
        let dir = tempfile::tempdir().unwrap();
        std::env::set_var("M3_RUN_ROOT", dir.path());
        let a = run_dir(None, 3).unwrap();
        let b = run_dir(None, 3).unwrap();
        assert_ne!(a, b);
        assert!(a.file_name().unwrap().to_str().unwrap().contains("-seed3"));
        assert!(a.starts_with(dir.path()));
    }
}
