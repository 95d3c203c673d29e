//! Command-line front end: `synth`, `ingest-check`, `label`, `eval` and
//! `report`.
//!
//! Settings resolve in the order flag, `--config` file, built-in default.
//! Every command that writes a directory also writes `run_manifest.json`
//! into it. Failures are reported on stderr as one JSON object
//! `{"error": <kind>, "message": <text>}` with a nonzero exit code
//! (2 for usage errors, 1 otherwise).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::enumerate_combinations;
use crate::ingest::{load_session_dir, session_integrity_report, ModuleId, DEFAULT_FPS};
use crate::metrics::EvalReport;
use crate::output::{read_json, write_json};
use crate::protocol::{run_experiment, ExperimentConfig, Report, ThresholdMode};
use crate::svm::ClassWeight;
use crate::synthgen::{write_sessions, Preset, SynthParams};
use crate::windowing::{
    build_dataset, pooled_thresholds, read_dataset, write_dataset, ThresholdSource, DEFAULT_MIN_VALID_FRACTION,
    DEFAULT_P_HIGH, DEFAULT_P_LOW, DEFAULT_WINDOW_SECONDS,
};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "attnfuse", version, about = "Attention-level estimation from facial feature streams")]
pub struct Cli {
    /// JSON settings file; command-line flags take precedence over it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print nothing but errors
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic sessions with planted attention couplings
    Synth(SynthArgs),
    /// Parse and validate a session directory and report its integrity
    IngestCheck(IngestCheckArgs),
    /// Window and label sessions into a dataset directory
    Label(LabelArgs),
    /// Leave-one-user-out evaluation of module subsets
    Eval(EvalArgs),
    /// Print the results table of an earlier `eval`
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// easy, medium or null [default: easy]
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of users [default: 6]
    #[arg(long)]
    pub users: Option<usize>,
    /// Session length in seconds [default: 600]
    #[arg(long)]
    pub duration: Option<u64>,
    /// Output directory (one sub-directory per user)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestCheckArgs {
    /// Session directory (one sub-directory per user)
    #[arg(long)]
    pub data: PathBuf,
    /// Frame rate of the feature streams [default: 30]
    #[arg(long)]
    pub fps: Option<u32>,
    /// Also write the integrity reports as JSON to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdSourceArg {
    /// Pooled one-minute window means
    WindowMeans,
    /// Pooled raw 1 Hz samples
    Raw,
}

impl From<ThresholdSourceArg> for ThresholdSource {
    fn from(v: ThresholdSourceArg) -> Self {
        match v {
            ThresholdSourceArg::WindowMeans => ThresholdSource::WindowMeans,
            ThresholdSourceArg::Raw => ThresholdSource::RawSamples,
        }
    }
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Session directory (one sub-directory per user)
    #[arg(long)]
    pub data: PathBuf,
    /// Low-attention percentile [default: 10]
    #[arg(long)]
    pub low: Option<f64>,
    /// High-attention percentile [default: 90]
    #[arg(long)]
    pub high: Option<f64>,
    /// Window length in seconds [default: 60]
    #[arg(long)]
    pub window: Option<u64>,
    /// Minimum fraction of valid frames per window [default: 0.8]
    #[arg(long)]
    pub min_valid: Option<f64>,
    /// Values the percentiles are taken over [default: window-means]
    #[arg(long, value_enum)]
    pub threshold_source: Option<ThresholdSourceArg>,
    /// Modules to window, joined by '+' [default: every module present in all sessions]
    #[arg(long)]
    pub modules: Option<String>,
    /// Frame rate of the feature streams [default: 30]
    #[arg(long)]
    pub fps: Option<u32>,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset directory written by `label`
    #[arg(long)]
    pub dataset: PathBuf,
    /// Subsets: modules joined by '+', subsets separated by ';', 'all' for every combination [default: all]
    #[arg(long)]
    pub subsets: Option<String>,
    /// Let 'all' include the head-distance module
    #[arg(long)]
    pub include_hd: bool,
    /// pooled_test or train_calibrated [default: pooled_test]
    #[arg(long)]
    pub threshold_mode: Option<String>,
    /// none or balanced [default: balanced]
    #[arg(long)]
    pub class_weight: Option<String>,
    /// Inner folds for the selection of C [default: 3]
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Comma-separated C grid [default: 1e-4,1e-3,1e-2,1e-1,1,10,100]
    #[arg(long)]
    pub c_grid: Option<String>,
    /// Fusion weights as module=weight pairs, comma-separated [default: equal]
    #[arg(long)]
    pub weights: Option<String>,
    /// Results directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results directory written by `eval`
    #[arg(long)]
    pub results: PathBuf,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub quiet: Option<bool>,
    #[serde(default)]
    pub synth: SynthSettings,
    #[serde(default)]
    pub ingest: IngestSettings,
    #[serde(default)]
    pub label: LabelSettings,
    #[serde(default)]
    pub eval: EvalSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSettings {
    pub preset: Option<String>,
    pub users: Option<usize>,
    pub duration: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSettings {
    pub fps: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSettings {
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub window: Option<u64>,
    pub min_valid: Option<f64>,
    pub threshold_source: Option<ThresholdSourceArg>,
    pub modules: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub subsets: Option<String>,
    pub include_hd: Option<bool>,
    pub threshold_mode: Option<ThresholdMode>,
    pub class_weight: Option<ClassWeight>,
    pub inner_folds: Option<usize>,
    pub c_grid: Option<Vec<f64>>,
    pub weights: Option<BTreeMap<ModuleId, f64>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Written next to the outputs of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective settings after merging flags, config file and defaults.
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by path relative to the input root.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file, keyed by path relative to the output root.
    pub outputs: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
    /// The previous manifest in this directory recorded the same command,
    /// settings and input hashes.
    pub reproduction: bool,
    /// With `reproduction`: whether the outputs also hash identically.
    pub outputs_match: Option<bool>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            return report_error(&Error::Usage(e.to_string().trim_end().to_string()));
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{body}");
    if matches!(e, Error::Usage(_)) {
        2
    } else {
        1
    }
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let file = match &cli.config {
        Some(p) => read_json::<FileConfig>(p).map_err(|e| match e {
            Error::Json(j) => Error::InvalidParams(format!("config {}: {j}", p.display())),
            other => other,
        })?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let quiet = cli.quiet || file.quiet.unwrap_or(false);
    let mut sink = std::io::sink();
    let out: &mut dyn Write = if quiet { &mut sink } else { out };
    match &cli.command {
        Command::Synth(a) => synth(a, &file.synth, seed, out),
        Command::IngestCheck(a) => ingest_check(a, &file.ingest, out),
        Command::Label(a) => label(a, &file.label, file.ingest.fps, out),
        Command::Eval(a) => eval(a, &file.eval, seed, out),
        Command::Report(a) => report(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn synth(a: &SynthArgs, f: &SynthSettings, seed: u64, out: &mut dyn Write) -> Result<()> {
    let started = now();
    let preset: Preset = a.preset.as_deref().or(f.preset.as_deref()).unwrap_or("easy").parse()?;
    let users = a.users.or(f.users).unwrap_or(6);
    let duration = a.duration.or(f.duration).unwrap_or(600);
    let params = SynthParams::preset(preset, users, duration, seed);
    let ids = write_sessions(&params, &a.out)?;
    let config = serde_json::json!({ "preset": preset.as_str(), "params": params });
    write_manifest(&a.out, "synth", config, BTreeMap::new(), started)?;
    emit(out, &format!("wrote {} sessions ({} preset, {} s each, seed {}) to {}\n", ids.len(), preset.as_str(), duration, seed, a.out.display()))
}

fn ingest_check(a: &IngestCheckArgs, f: &IngestSettings, out: &mut dyn Write) -> Result<()> {
    let fps = a.fps.or(f.fps).unwrap_or(DEFAULT_FPS);
    let sessions = load_session_dir(&a.data, fps)?;
    let reports: Vec<_> = sessions.iter().map(session_integrity_report).collect();
    if let Some(p) = &a.out {
        write_json(p, &reports)?;
    }
    let mut text = String::new();
    for r in &reports {
        let _ = writeln!(text, "{}: {} s, {} attention gap(s)", r.user_id, r.duration_seconds, r.attention_gaps.len());
        for (m, s) in &r.modules {
            let _ = writeln!(
                text,
                "  {:<5} frames {:>7}  valid {:.4}  invalid {}  missing {}  truncated {}",
                m.as_str(),
                s.total_frames,
                s.valid_fraction,
                s.invalid_frames,
                s.missing_frames,
                s.truncated_frames
            );
        }
    }
    let _ = writeln!(text, "{} sessions OK", reports.len());
    emit(out, &text)
}

fn label(a: &LabelArgs, f: &LabelSettings, file_fps: Option<u32>, out: &mut dyn Write) -> Result<()> {
    let started = now();
    let fps = a.fps.or(file_fps).unwrap_or(DEFAULT_FPS);
    let p_low = a.low.or(f.low).unwrap_or(DEFAULT_P_LOW);
    let p_high = a.high.or(f.high).unwrap_or(DEFAULT_P_HIGH);
    let window = a.window.or(f.window).unwrap_or(DEFAULT_WINDOW_SECONDS);
    let min_valid = a.min_valid.or(f.min_valid).unwrap_or(DEFAULT_MIN_VALID_FRACTION);
    let source = a.threshold_source.or(f.threshold_source).unwrap_or(ThresholdSourceArg::WindowMeans);
    if window == 0 {
        return Err(Error::InvalidParams("window must be at least 1 s".into()));
    }
    if !(0.0..=1.0).contains(&min_valid) {
        return Err(Error::InvalidParams(format!("min-valid must lie in [0, 1], got {min_valid}")));
    }
    // reject bad percentiles before touching the data
    crate::windowing::compute_thresholds(&[0.0], p_low, p_high)?;

    let sessions = load_session_dir(&a.data, fps)?;
    let modules = match a.modules.as_deref().or(f.modules.as_deref()) {
        Some(spec) => parse_module_list(spec)?,
        None => {
            let mut common: Vec<ModuleId> = ModuleId::ALL.to_vec();
            for s in &sessions {
                let present = s.modules();
                common.retain(|m| present.contains(m));
            }
            common
        }
    };
    if modules.is_empty() {
        return Err(Error::EmptyInput("modules present in every session"));
    }
    let th = pooled_thresholds(&sessions, window, p_low, p_high, source.into())?;
    let ds = build_dataset(&sessions, &th, &modules, window, min_valid)?;
    write_dataset(&ds, &a.out)?;
    let config = serde_json::json!({
        "low": p_low, "high": p_high, "window": window, "min_valid": min_valid,
        "threshold_source": source, "modules": modules, "fps": fps,
    });
    write_manifest(&a.out, "label", config, hash_tree(&a.data)?, started)?;

    let c = &ds.counts;
    let mut text = String::new();
    let _ = writeln!(text, "thresholds: low < {:.4}, high > {:.4}", th.tau_low, th.tau_high);
    let _ = writeln!(
        text,
        "windows: total {}  high {}  low {}  excluded {}  dropped (validity) {}",
        c.candidates, c.high, c.low, c.excluded, c.dropped_invalid
    );
    let _ = writeln!(text, "dataset: {} samples from {} users -> {}", ds.len(), ds.users.len(), a.out.display());
    emit(out, &text)
}

fn eval(a: &EvalArgs, f: &EvalSettings, seed: u64, out: &mut dyn Write) -> Result<()> {
    let started = now();
    let subsets_spec = a.subsets.clone().or_else(|| f.subsets.clone()).unwrap_or_else(|| "all".into());
    let include_hd = a.include_hd || f.include_hd.unwrap_or(false);
    let threshold_mode = match &a.threshold_mode {
        Some(s) => s.parse()?,
        None => f.threshold_mode.unwrap_or_default(),
    };
    let class_weight = match &a.class_weight {
        Some(s) => s.parse().map_err(|e: Error| Error::Usage(e.to_string()))?,
        None => f.class_weight.unwrap_or(ClassWeight::Balanced),
    };
    let c_grid = match &a.c_grid {
        Some(s) => parse_c_grid(s)?,
        None => f.c_grid.clone().unwrap_or_else(|| crate::svm::DEFAULT_C_GRID.to_vec()),
    };
    let weights = match &a.weights {
        Some(s) => parse_weights(s)?,
        None => f.weights.clone().unwrap_or_default(),
    };

    let ds = read_dataset(&a.dataset)?;
    let available = ds.modules();
    let subsets = parse_subsets(&subsets_spec, &available, include_hd)?;
    let mut cfg = ExperimentConfig::default_for(&ds);
    cfg.subsets = subsets;
    cfg.weights = weights;
    cfg.c_grid = c_grid;
    cfg.inner_folds = a.inner_folds.or(f.inner_folds).unwrap_or(cfg.inner_folds);
    cfg.threshold_mode = threshold_mode;
    cfg.seed = seed;
    cfg.train.seed = seed;
    cfg.train.class_weight = class_weight;
    if let Some(t) = f.tol {
        cfg.train.tol = t;
    }
    if let Some(m) = f.max_iter {
        cfg.train.max_iter = m;
    }

    let res = run_experiment(&cfg, &ds)?;
    res.write(&ds, &a.out)?;
    let config = serde_json::to_value(&cfg)?;
    write_manifest(&a.out, "eval", config, hash_tree(&a.dataset)?, started)?;

    let mut text = format_table(&res.reports, threshold_mode);
    for f in &res.failed {
        let _ = writeln!(text, "fold {} excluded: {}", f.user_id, f.reason);
    }
    emit(out, &text)
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let r: Report = read_json(&a.results.join("report.json"))?;
    let mut text = format!(
        "{} samples ({} high / {} low), {} users, {} folds\n",
        r.dataset.n_samples,
        r.dataset.n_high,
        r.dataset.n_low,
        r.dataset.users.len(),
        r.folds.len()
    );
    text.push_str(&format_table(&r.subsets, r.threshold_mode));
    for f in &r.failed_folds {
        let _ = writeln!(text, "fold {} excluded: {}", f.user_id, f.reason);
    }
    emit(out, &text)
}

/// Results table grouped by subset size; within a group the best subset
/// comes first. In train-calibrated mode the fixed-0.5 operating point
/// leads and decides the order.
pub fn format_table(reports: &[EvalReport], mode: ThresholdMode) -> String {
    let size = |r: &EvalReport| r.subset.split('+').count();
    let key = |r: &EvalReport| match mode {
        ThresholdMode::PooledTest => r.max_acc,
        ThresholdMode::TrainCalibrated => r.fixed.accuracy,
    };
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        size(a)
            .cmp(&size(b))
            .then(key(b).total_cmp(&key(a)))
            .then_with(|| a.subset.cmp(&b.subset))
    });
    let width = rows.iter().map(|r| r.subset.len()).max().unwrap_or(6).max(6);
    let mut s = String::new();
    match mode {
        ThresholdMode::PooledTest => {
            let _ = writeln!(s, "{:<width$} | max_acc | 1-EER", "subset");
            let _ = writeln!(s, "{}-+---------+-------", "-".repeat(width));
            for r in rows {
                let _ = writeln!(s, "{:<width$} | {:>7.4} | {:.4}", r.subset, r.max_acc, r.acc_at_eer);
            }
        }
        ThresholdMode::TrainCalibrated => {
            let _ = writeln!(s, "{:<width$} | acc@0.5 | bal_acc@0.5 | max_acc | 1-EER", "subset");
            let _ = writeln!(s, "{}-+---------+-------------+---------+-------", "-".repeat(width));
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<width$} | {:>7.4} | {:>11.4} | {:>7.4} | {:.4}",
                    r.subset,
                    r.fixed.accuracy,
                    r.fixed.balanced_accuracy(),
                    r.max_acc,
                    r.acc_at_eer
                );
            }
        }
    }
    s
}

fn parse_module_list(spec: &str) -> Result<Vec<ModuleId>> {
    let mut mods = Vec::new();
    for tok in spec.split('+').map(str::trim).filter(|t| !t.is_empty()) {
        let m: ModuleId = tok.parse()?;
        if !mods.contains(&m) {
            mods.push(m);
        }
    }
    if mods.is_empty() {
        return Err(Error::Usage(format!("empty module list '{spec}'")));
    }
    mods.sort();
    Ok(mods)
}

/// Expands the subset grammar: modules joined by `+`, subsets separated by
/// `;`, and `all` for every nonempty combination of `available` (minus
/// head distance unless `include_hd`). Duplicates are dropped, first
/// occurrence wins.
pub fn parse_subsets(spec: &str, available: &[ModuleId], include_hd: bool) -> Result<Vec<Vec<ModuleId>>> {
    let mut out: Vec<Vec<ModuleId>> = Vec::new();
    let push = |s: Vec<ModuleId>, out: &mut Vec<Vec<ModuleId>>| {
        if !out.contains(&s) {
            out.push(s);
        }
    };
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            let pool: Vec<ModuleId> = available.iter().copied().filter(|&m| include_hd || m != ModuleId::Hd).collect();
            for s in enumerate_combinations(&pool) {
                push(s, &mut out);
            }
            continue;
        }
        let mods = parse_module_list(part)?;
        if let Some(m) = mods.iter().find(|m| !available.contains(m)) {
            return Err(Error::MissingModule(*m));
        }
        push(mods, &mut out);
    }
    if out.is_empty() {
        return Err(Error::Usage(format!("no subsets in '{spec}'")));
    }
    Ok(out)
}

fn parse_c_grid(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Usage(format!("bad C value '{t}'"))))
        .collect()
}

fn parse_weights(spec: &str) -> Result<BTreeMap<ModuleId, f64>> {
    let mut w = BTreeMap::new();
    for pair in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (m, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("weight '{pair}' is not of the form module=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Usage(format!("bad weight '{pair}'")))?;
        w.insert(m.parse()?, v);
    }
    Ok(w)
}

fn now() -> String {
    jiff::Timestamp::now().round(jiff::Unit::Second).map(|t| t.to_string()).unwrap_or_default()
}

/// SHA-256 of every regular file under `root` (recursively), keyed by the
/// `/`-separated relative path. The run manifest itself is skipped.
pub fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name == MANIFEST_FILE || name.starts_with('.') {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
                let rel = p.strip_prefix(root).unwrap_or(&p);
                let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.insert(key, hex::encode(Sha256::digest(&bytes)));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    if root.is_file() {
        let bytes = std::fs::read(root).map_err(|e| Error::io(root, e))?;
        let name = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        out.insert(name, hex::encode(Sha256::digest(&bytes)));
    } else {
        walk(root, root, &mut out)?;
    }
    Ok(out)
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    started_at: String,
) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let outputs = hash_tree(dir)?;
    let previous: Option<RunManifest> = path.exists().then(|| read_json(&path).ok()).flatten();
    let reproduction = previous
        .as_ref()
        .is_some_and(|p| p.command == command && p.config == config && p.inputs == inputs);
    let outputs_match = reproduction.then(|| previous.as_ref().is_some_and(|p| p.outputs == outputs));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config,
        inputs,
        outputs,
        started_at,
        finished_at: now(),
        reproduction,
        outputs_match,
    };
    write_json(&path, &manifest)
}
