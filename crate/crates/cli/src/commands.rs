use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};
use m3_core::datasets::{
    load_manifest, read_fixture, synth_generate, Composition, DatasetManifest, DomainShift, SynthSpec,
};
use m3_core::exec::{configure_workers, Exec};
use m3_core::fsio::write_atomic;
use m3_core::harness::{
    ablation_csv, cross_eval, emit_report, evaluate, load_partition, load_samples, parse_suite, predictions_csv,
    preset_gradcheck, read_predictions_csv, resolve_split, run_ablation, save_run, train, RunRecord, RunSeries,
    TrainConfig, GRADCHECK_STEP, GRADCHECK_TOLERANCE,
};
use m3_core::metrics::MetricsReport;
use m3_core::predictor::{param_count, read_checkpoint};
use m3_core::protocol::{
    render_description_prompt, render_multiround, render_oneround, Aspect, AspectScores, MosRange, MosRecord,
};

use crate::config::{self, TrainFlags};
use crate::{Cli, Command, UsageError};

const OUT_HELP: &str = "Output directory [default: <timestamp>-seed<seed> under $M3_RUN_ROOT, or ./runs]";

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let exec = match cli.workers {
        Some(0) => return Err(UsageError("--workers must be at least 1".into()).into()),
        Some(1) => Exec::Sequential,
        Some(n) => {
            configure_workers(n);
            Exec::Parallel
        }
        None => Exec::Parallel,
    };
    match &cli.command {
        Command::GenFixtures(c) => {
            no_config(cli, "gen-fixtures")?;
            gen_fixtures(c, cli.seed, exec)
        }
        Command::Train(c) => train_cmd(c, cli, exec),
        Command::Eval(c) => {
            no_config(cli, "eval")?;
            eval_cmd(c, cli.seed, exec)
        }
        Command::CrossEval(c) => cross_eval_cmd(c, cli, exec),
        Command::Ablate(c) => ablate(c, cli, exec),
        Command::Gradcheck(c) => gradcheck(c, cli),
        Command::Params(c) => params(c, cli),
        Command::RenderPrompt(c) => {
            no_config(cli, "render-prompt")?;
            render_prompt(c)
        }
        Command::Report(c) => {
            no_config(cli, "report")?;
            report(c, cli.seed)
        }
    }
}

fn no_config(cli: &Cli, cmd: &str) -> Result<()> {
    if cli.config.is_some() {
        return Err(UsageError(format!("--config does not apply to {cmd}")).into());
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

/// Width of the first fixture the configuration would read.
fn fixture_width(manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<usize> {
    let key = cfg.fixture_key();
    let path = manifest
        .records
        .iter()
        .find_map(|r| manifest.fixture_path(r, key))
        .with_context(|| format!("no '{key}' fixtures in dataset '{}'", manifest.name))?;
    Ok(read_fixture(&path)?.cols())
}

fn load_run(dir: &Path) -> Result<(RunRecord, PathBuf)> {
    let text = std::fs::read_to_string(dir.join("run.json"))
        .with_context(|| format!("reading run record in {}", dir.display()))?;
    let record: RunRecord = serde_json::from_str(&text)?;
    let ckpt = record.checkpoint.clone().unwrap_or_else(|| dir.join("checkpoint.m3ck"));
    // a run directory may have moved since it was written
    let ckpt = if ckpt.exists() { ckpt } else { dir.join("checkpoint.m3ck") };
    Ok((record, ckpt))
}

// gen-fixtures ----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct GenFixtures {
    #[arg(long, help = OUT_HELP)]
    pub out: Option<PathBuf>,
    /// Base specification document (JSON/TOML); flags override it
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Dataset name recorded in the manifest
    #[arg(long)]
    pub name: Option<String>,
    /// Number of samples
    #[arg(long)]
    pub count: Option<usize>,
    /// Sequence length
    #[arg(long)]
    pub len: Option<usize>,
    /// Row width (the simulated vocabulary)
    #[arg(long)]
    pub width: Option<usize>,
    /// Signal-to-noise ratio of the latent score; 'inf' disables noise
    #[arg(long)]
    pub snr: Option<f64>,
    /// Seed of the structure shared between datasets
    #[arg(long)]
    pub pattern_seed: Option<u64>,
    /// Magnitude of a domain-shift offset, orthogonal to the score signal
    #[arg(long)]
    pub shift: Option<f64>,
    /// Seed of the shift direction
    #[arg(long, requires = "shift")]
    pub shift_seed: Option<u64>,
    /// Aspect the scores stand for
    #[arg(long)]
    pub aspect: Option<Aspect>,
    /// Compositions to emit fixtures for (comma-separated)
    #[arg(long, value_delimiter = ',')]
    pub composition: Vec<Composition>,
    /// Also emit hidden-state fixtures
    #[arg(long)]
    pub hidden_states: bool,
    /// Sample id prefix
    #[arg(long)]
    pub id_prefix: Option<String>,
}

fn gen_fixtures(c: &GenFixtures, seed: Option<u64>, exec: Exec) -> Result<ExitCode> {
    let mut spec: SynthSpec = match &c.spec {
        Some(p) => config::read_document(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = c.$f.clone() { spec.$f = v; })* };
    }
    set!(count, len, width, snr, pattern_seed, aspect, id_prefix);
    if let Some(m) = c.shift {
        spec.shift = Some(DomainShift { magnitude: m, seed: c.shift_seed.unwrap_or(spec.seed) });
    }
    if !c.composition.is_empty() {
        spec.compositions = c.composition.clone();
    }
    if c.hidden_states {
        spec.hidden_states = true;
    }
    let dir = config::run_dir(c.out.as_deref(), spec.seed)?;
    info!("generating {} samples ({}×{}) into {}", spec.count, spec.len, spec.width, dir.display());
    let mut manifest = synth_generate(&spec, &dir, exec)?;
    let path = dir.join("manifest.json");
    if let Some(name) = &c.name {
        manifest.name = name.clone();
        manifest.save(&path)?;
    }
    write_atomic(&dir.join("synth_spec.json"), json(&spec)?.as_bytes())?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

// train -----------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Train {
    /// Dataset manifest
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, help = OUT_HELP)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

fn train_cmd(c: &Train, cli: &Cli, exec: Exec) -> Result<ExitCode> {
    let (mut cfg, auto) = config::resolve(cli.config.as_deref(), &c.flags, cli.seed)?;
    let manifest = load_manifest(&c.manifest)?;
    if auto {
        cfg.predictor.d_vocab = fixture_width(&manifest, &cfg)?;
    }
    cfg.validate()?;
    let dir = config::run_dir(c.out.as_deref(), cfg.seed)?;
    info!("run directory {}", dir.display());
    let (split, data) = load_partition(&manifest, &cfg, exec)?;
    info!(
        "{}: {} train / {} val / {} test",
        manifest.name,
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    let mut t = train(&cfg, &data.train, &data.val, None, exec)?;
    t.record.dataset = manifest.name.clone();
    t.record.split = Some(split);
    let ev = if data.test.is_empty() {
        warn!("empty test split; no test report");
        None
    } else {
        Some(evaluate(&t.params, &data.test, &manifest.name, "test", Some(manifest.range), exec)?)
    };
    save_run(&dir, &mut t, ev.as_ref())?;
    info!(
        "kept epoch {} of {}, {:.1}s",
        t.record.selected_epoch,
        t.record.epochs.len(),
        t.record.wall_clock_secs
    );
    if let Some(ev) = &ev {
        info!("test SRCC {:.4}, PLCC {:.4}, MSE {:.4}", ev.report.srcc, ev.report.plcc, ev.report.mse);
    }
    println!("{}", dir.display());
    Ok(ExitCode::SUCCESS)
}

// eval ------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Eval {
    /// Run directory written by `train`
    #[arg(long)]
    pub run: PathBuf,
    /// Dataset manifest
    #[arg(long)]
    pub manifest: PathBuf,
    /// Which part of the run's split to score: test, val, train, or all records
    #[arg(long, default_value = "test", value_parser = ["test", "val", "train", "all"])]
    pub split: String,
    #[arg(long, help = OUT_HELP)]
    pub out: Option<PathBuf>,
}

fn eval_cmd(c: &Eval, seed: Option<u64>, exec: Exec) -> Result<ExitCode> {
    let (record, ckpt) = load_run(&c.run)?;
    let params = read_checkpoint(&ckpt)?;
    let manifest = load_manifest(&c.manifest)?;
    let cfg = &record.config;
    let ids: Vec<String> = if c.split == "all" {
        manifest.records.iter().map(|r| r.id.clone()).collect()
    } else {
        let s = resolve_split(&manifest, cfg)?;
        match c.split.as_str() {
            "train" => s.train,
            "val" => s.val,
            _ => s.test,
        }
    };
    let samples = load_samples(&manifest, &ids, cfg.fixture_key(), cfg.aspect, exec)?;
    let ev = evaluate(&params, &samples, &manifest.name, &c.split, Some(manifest.range), exec)?;
    let dir = config::run_dir(c.out.as_deref(), seed.unwrap_or(cfg.seed))?;
    write_atomic(&dir.join("predictions.csv"), predictions_csv(&ev.predictions)?.as_bytes())?;
    let report = ev.report.to_json()?;
    write_atomic(&dir.join("report.json"), report.as_bytes())?;
    info!("{} {}: SRCC {:.4}, PLCC {:.4} (n = {})", manifest.name, c.split, ev.report.srcc, ev.report.plcc, ev.report.n);
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

// cross-eval ------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CrossEval {
    /// Run directory of the predictor trained on the source dataset
    #[arg(long)]
    pub source: PathBuf,
    /// Manifest of the target dataset
    #[arg(long)]
    pub target: PathBuf,
    /// Also continue training on the target train split and score again
    #[arg(long)]
    pub with_tp: bool,
    #[arg(long, help = OUT_HELP)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

fn cross_eval_cmd(c: &CrossEval, cli: &Cli, exec: Exec) -> Result<ExitCode> {
    let (record, ckpt) = load_run(&c.source)?;
    let source = read_checkpoint(&ckpt)?;
    // without --config the source run's settings carry over
    let mut cfg = match &cli.config {
        Some(s) => config::base_config(Some(s))?,
        None => record.config.clone(),
    };
    config::apply_flags(&mut cfg, &c.flags, cli.seed);
    cfg.predictor = source.config.clone();
    cfg.validate()?;
    let target = load_manifest(&c.target)?;
    let (_, data) = load_partition(&target, &cfg, exec)?;
    let dir = config::run_dir(c.out.as_deref(), cfg.seed)?;
    info!("{} → {}: {} test samples", record.dataset, target.name, data.test.len());
    let out = cross_eval(&source, &data, &target.name, Some(target.range), c.with_tp.then_some(&cfg), exec)?;
    info!("zero-shot SRCC {:.4}", out.zero_shot.srcc);
    if let Some(r) = &out.with_tp {
        info!("with target training SRCC {:.4}", r.srcc);
    }
    let text = json(&out)?;
    write_atomic(&dir.join("cross_eval.json"), text.as_bytes())?;
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}

// ablate ----------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Ablate {
    /// Dataset manifest
    #[arg(long)]
    pub manifest: PathBuf,
    /// Variants, comma-separated; '+' combines changes (e.g. mean,last,mean+bypass_xlstm)
    #[arg(long, required = true, value_delimiter = ',')]
    pub suite: Vec<String>,
    #[arg(long, help = OUT_HELP)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

fn ablate(c: &Ablate, cli: &Cli, exec: Exec) -> Result<ExitCode> {
    let suite = parse_suite(&c.suite).map_err(|e| UsageError(e.to_string()))?;
    let (mut cfg, auto) = config::resolve(cli.config.as_deref(), &c.flags, cli.seed)?;
    let manifest = load_manifest(&c.manifest)?;
    if auto {
        cfg.predictor.d_vocab = fixture_width(&manifest, &cfg)?;
    }
    let rows = run_ablation(&cfg, &manifest, &suite, exec)?;
    let dir = config::run_dir(c.out.as_deref(), cfg.seed)?;
    let table = ablation_csv(&rows)?;
    write_atomic(&dir.join("ablation.csv"), table.as_bytes())?;
    write_atomic(&dir.join("ablation.json"), json(&rows)?.as_bytes())?;
    print!("{table}");
    let failed: Vec<&str> = rows.iter().filter(|r| r.error.is_some()).map(|r| r.variant.as_str()).collect();
    if !failed.is_empty() {
        bail!("{} variant(s) failed: {}", failed.len(), failed.join(", "));
    }
    Ok(ExitCode::SUCCESS)
}

// gradcheck -------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Gradcheck {
    /// Model preset (tiny, synthetic, default); --config may name a file instead
    #[arg(long)]
    pub preset: Option<String>,
    /// Central-difference step
    #[arg(long, default_value_t = GRADCHECK_STEP)]
    pub step: f64,
    /// Largest acceptable relative error
    #[arg(long, default_value_t = GRADCHECK_TOLERANCE)]
    pub tolerance: f64,
}

fn gradcheck(c: &Gradcheck, cli: &Cli) -> Result<ExitCode> {
    let cfg = match (&c.preset, &cli.config) {
        (Some(_), Some(_)) => return Err(UsageError("--preset and --config are exclusive".into()).into()),
        (Some(name), None) => config::preset(name)
            .ok_or_else(|| UsageError(format!("unknown preset '{name}' ({})", config::PRESETS.join(", "))))?,
        (None, spec) => config::base_config(Some(spec.as_deref().unwrap_or("tiny")))?,
    };
    if !(c.step > 0.0 && c.step.is_finite()) {
        return Err(UsageError(format!("--step must be positive, got {}", c.step)).into());
    }
    let seed = cli.seed.unwrap_or(cfg.seed);
    let report = preset_gradcheck(&cfg.predictor, seed, c.step)?;
    println!("{:<24} {:>8} {:>12} {:>14} {:>14}", "tensor", "checked", "max rel err", "analytic", "numeric");
    for g in &report.groups {
        println!(
            "{:<24} {:>8} {:>12.3e} {:>14.6e} {:>14.6e}",
            format!("{}[{}]", g.tensor, g.worst_index),
            g.count,
            g.max_rel_error,
            g.analytic,
            g.numeric
        );
    }
    println!("max relative error {:.3e} (step {}, tolerance {})", report.max_rel_error(), c.step, c.tolerance);
    if report.passes(c.tolerance) {
        return Ok(ExitCode::SUCCESS);
    }
    match report.worst() {
        Some(w) => eprintln!(
            "error: gradient check failed; worst offender {}[{}]: relative error {:.3e} (analytic {:.6e}, numeric {:.6e})",
            w.tensor, w.worst_index, w.max_rel_error, w.analytic, w.numeric
        ),
        None => eprintln!("error: gradient check failed"),
    }
    Ok(ExitCode::from(1))
}

// params ----------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Params {
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
}

/// `65667072` → `65,667,072`.
pub fn group_digits(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::with_capacity(s.len() + s.len() / 3);
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn params(c: &Params, cli: &Cli) -> Result<ExitCode> {
    let cfg = config::base_config(cli.config.as_deref())?.predictor;
    let counts = param_count(&cfg)?;
    if c.json {
        println!("{}", json(&counts)?);
        return Ok(ExitCode::SUCCESS);
    }
    let p = &cfg;
    println!("d_vocab {}, d_h {}, layout {}, heads {}, head hidden {}", p.d_vocab, p.d_h, p.layout, p.heads, p.hidden());
    println!("{:<16} {:>14}", "projection", group_digits(counts.projection));
    for (i, (kind, n)) in p.layout.kinds().iter().zip(&counts.blocks).enumerate() {
        println!("{:<16} {:>14}", format!("block {i} ({kind})"), group_digits(*n));
    }
    println!("{:<16} {:>14}", "head", group_digits(counts.head));
    println!("{:<16} {:>14}", "total", group_digits(counts.total));
    Ok(ExitCode::SUCCESS)
}

// render-prompt ---------------------------------------------------------------

#[derive(Debug, Args)]
pub struct RenderPrompt {
    /// Aspect the prompt asks about
    #[arg(long, default_value = "quality")]
    pub aspect: Aspect,
    /// Template: oneround, multiround, or description
    #[arg(long, value_parser = ["oneround", "multiround", "description"])]
    pub template: String,
    /// Text-to-image prompt of the image
    #[arg(long)]
    pub prompt: String,
    /// multiround: the assistant's description, which adds the rating request
    #[arg(long)]
    pub description: Option<String>,
    /// multiround: the one-word answer (needs --description)
    #[arg(long, requires = "description")]
    pub answer: Option<String>,
    /// multiround: print the conversation as a JSON line
    #[arg(long)]
    pub json: bool,
    /// description: quality MOS
    #[arg(long)]
    pub mos_quality: Option<f64>,
    /// description: correspondence MOS
    #[arg(long)]
    pub mos_correspondence: Option<f64>,
    /// description: authenticity MOS
    #[arg(long)]
    pub mos_authenticity: Option<f64>,
    /// description: lower end of the MOS range
    #[arg(long, default_value_t = 0.0)]
    pub range_min: f64,
    /// description: upper end of the MOS range
    #[arg(long, default_value_t = 5.0)]
    pub range_max: f64,
}

fn render_prompt(c: &RenderPrompt) -> Result<ExitCode> {
    let multi_only = c.description.is_some() || c.json;
    let desc_only = c.mos_quality.is_some() || c.mos_correspondence.is_some() || c.mos_authenticity.is_some();
    if (multi_only && c.template != "multiround") || (desc_only && c.template != "description") {
        return Err(UsageError(format!("flag does not apply to the {} template", c.template)).into());
    }
    let text = match c.template.as_str() {
        "oneround" => render_oneround(c.aspect, &c.prompt),
        "multiround" => {
            let conv = render_multiround("prompt", c.aspect, &c.prompt, c.description.as_deref(), c.answer.as_deref())?;
            if c.json {
                conv.to_json_line()?
            } else {
                conv.transcript()
            }
        }
        _ => {
            let record = MosRecord {
                id: "prompt".into(),
                prompt: c.prompt.clone(),
                mos: AspectScores {
                    quality: c.mos_quality,
                    correspondence: c.mos_correspondence,
                    authenticity: c.mos_authenticity,
                },
                range: MosRange::new(c.range_min, c.range_max)?,
            };
            record.validate()?;
            render_description_prompt(&record)?
        }
    };
    println!("{}", text.trim_end());
    Ok(ExitCode::SUCCESS)
}

// report ----------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct Report {
    /// Run to plot, as DIR or NAME=DIR; repeat for several (needs predictions.csv and report.json)
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    #[arg(long, help = OUT_HELP)]
    pub out: Option<PathBuf>,
}

fn report(c: &Report, seed: Option<u64>) -> Result<ExitCode> {
    let mut series = Vec::with_capacity(c.runs.len());
    for spec in &c.runs {
        let (name, dir) = match spec.split_once('=') {
            Some((n, d)) => (n.to_string(), PathBuf::from(d)),
            None => {
                let d = PathBuf::from(spec);
                let n = d.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| spec.clone());
                (n, d)
            }
        };
        let preds = std::fs::read_to_string(dir.join("predictions.csv"))
            .with_context(|| format!("reading predictions of {}", dir.display()))?;
        let rep = std::fs::read_to_string(dir.join("report.json"))
            .with_context(|| format!("reading report of {}", dir.display()))?;
        let report: MetricsReport = serde_json::from_str(&rep)?;
        series.push(RunSeries { name, predictions: read_predictions_csv(&preds)?, report });
    }
    let dir = config::run_dir(c.out.as_deref(), seed.unwrap_or(0))?;
    let files = emit_report(&series, &dir)?;
    for p in [&files.scatter_csv, &files.plot_svg, &files.summary_csv] {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}
