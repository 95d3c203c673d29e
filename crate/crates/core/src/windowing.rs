//! One-minute windows displaced every second, percentile labeling, and the
//! labeled per-module window matrices.
//!
//! A window ending at second `e` covers attention seconds `[e - W, e)` and
//! frame slots `[(e - W) * fps, e * fps)`. Its feature vector for a module is
//! the in-order concatenation of those frames, `W * fps * dim` values long.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FrameStatus, ModuleId, SessionRecord};
use crate::linalg::FeatureMatrix;
use crate::output::{read_json, write_atomic, write_json};

pub const DEFAULT_WINDOW_SECONDS: u64 = 60;
pub const DEFAULT_MIN_VALID_FRACTION: f64 = 0.8;
pub const DEFAULT_P_LOW: f64 = 10.0;
pub const DEFAULT_P_HIGH: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_low: f64,
    pub tau_high: f64,
    pub p_low: f64,
    pub p_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    High,
    Low,
    Excluded,
}

impl Label {
    pub fn is_high(self) -> bool {
        self == Label::High
    }

    /// `+1` for High, `-1` for Low.
    pub fn sign(self) -> f64 {
        match self {
            Label::High => 1.0,
            Label::Low => -1.0,
            Label::Excluded => 0.0,
        }
    }
}

/// What the percentile thresholds are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    /// Pooled one-minute window means (the labeled quantity).
    #[default]
    WindowMeans,
    /// Pooled raw 1 Hz attention samples.
    RawSamples,
}

/// Metadata of one labeled window. Its feature vectors live in the owning
/// [`LabeledDataset`]'s per-module matrices at the same row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub user_id: String,
    pub end_second: u64,
    pub mean_attention: f64,
    pub label: Label,
    pub valid_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub candidates: usize,
    pub high: usize,
    pub low: usize,
    pub excluded: usize,
    /// High/Low windows dropped for too little valid frame data.
    pub dropped_invalid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<WindowSample>,
    pub users: Vec<String>,
    pub thresholds: Thresholds,
    pub window_seconds: u64,
    pub fps: u32,
    pub min_valid_fraction: f64,
    pub counts: LabelCounts,
    pub matrices: BTreeMap<ModuleId, FeatureMatrix>,
}

impl LabeledDataset {
    /// Assembles a dataset from parts, checking its invariants.
    pub fn from_parts(
        samples: Vec<WindowSample>,
        thresholds: Thresholds,
        window_seconds: u64,
        fps: u32,
        matrices: BTreeMap<ModuleId, FeatureMatrix>,
    ) -> Result<Self> {
        if samples.iter().any(|s| s.label == Label::Excluded) {
            return Err(Error::InvalidInput("dataset contains Excluded samples".into()));
        }
        for (m, x) in &matrices {
            if x.rows() != samples.len() {
                return Err(Error::DimensionMismatch {
                    expected: samples.len(),
                    found: x.rows(),
                });
            }
            let want = window_seconds as usize * fps as usize * m.dim();
            if x.cols() != want {
                return Err(Error::DimensionMismatch {
                    expected: want,
                    found: x.cols(),
                });
            }
        }
        let users: BTreeSet<String> = samples.iter().map(|s| s.user_id.clone()).collect();
        let high = samples.iter().filter(|s| s.label == Label::High).count();
        let counts = LabelCounts {
            candidates: samples.len(),
            high,
            low: samples.len() - high,
            excluded: 0,
            dropped_invalid: 0,
        };
        Ok(Self {
            samples,
            users: users.into_iter().collect(),
            thresholds,
            window_seconds,
            fps,
            min_valid_fraction: 0.0,
            counts,
            matrices,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn modules(&self) -> Vec<ModuleId> {
        self.matrices.keys().copied().collect()
    }

    pub fn matrix(&self, module: ModuleId) -> Result<&FeatureMatrix> {
        self.matrices.get(&module).ok_or(Error::MissingModule(module))
    }

    pub fn vector(&self, module: ModuleId, i: usize) -> Result<&[f64]> {
        Ok(self.matrix(module)?.row(i))
    }

    /// `+1` / `-1` targets in sample order.
    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label.sign()).collect()
    }
}

/// Number of windows a session of `duration` seconds yields before labeling.
pub fn candidate_window_count(duration_seconds: u64, window_seconds: u64) -> u64 {
    (duration_seconds + 1).saturating_sub(window_seconds)
}

fn check_window(session: &SessionRecord, end_second: u64, window_seconds: u64) -> Result<()> {
    if window_seconds == 0 || end_second < window_seconds || end_second > session.duration_seconds {
        return Err(Error::WindowOutOfRange {
            end_second,
            window_seconds,
            duration_seconds: session.duration_seconds,
        });
    }
    Ok(())
}

pub fn window_mean_attention(session: &SessionRecord, end_second: u64, window_seconds: u64) -> Result<f64> {
    check_window(session, end_second, window_seconds)?;
    let span = &session.attention[(end_second - window_seconds) as usize..end_second as usize];
    Ok(span.iter().sum::<f64>() / span.len() as f64)
}

/// Window feature vector as a borrowed slice of the aligned stream.
pub fn window_slice<'a>(
    session: &'a SessionRecord,
    module: ModuleId,
    end_second: u64,
    window_seconds: u64,
) -> Result<&'a [f64]> {
    check_window(session, end_second, window_seconds)?;
    let stream = session.stream(module)?;
    let per_sec = session.fps as usize * module.dim();
    Ok(&stream.values[(end_second - window_seconds) as usize * per_sec..end_second as usize * per_sec])
}

pub fn window_vector(session: &SessionRecord, module: ModuleId, end_second: u64, window_seconds: u64) -> Result<Vec<f64>> {
    window_slice(session, module, end_second, window_seconds).map(<[f64]>::to_vec)
}

/// Smallest per-module fraction of originally valid frames in the window.
pub fn window_valid_fraction(
    session: &SessionRecord,
    modules: &[ModuleId],
    end_second: u64,
    window_seconds: u64,
) -> Result<f64> {
    check_window(session, end_second, window_seconds)?;
    let fps = session.fps as usize;
    let range = (end_second - window_seconds) as usize * fps..end_second as usize * fps;
    let mut worst = 1.0f64;
    for &m in modules {
        let st = &session.stream(m)?.status[range.clone()];
        let valid = st.iter().filter(|&&s| s == FrameStatus::Valid).count();
        worst = worst.min(valid as f64 / st.len() as f64);
    }
    Ok(worst)
}

/// Nearest-rank percentiles: the `ceil(p/100 * N)`-th smallest value.
pub fn compute_thresholds(values: &[f64], p_low: f64, p_high: f64) -> Result<Thresholds> {
    if !(p_low > 0.0 && p_low < p_high && p_high < 100.0) {
        return Err(Error::InvalidParams(format!(
            "percentiles must satisfy 0 < p_low < p_high < 100, got {p_low} and {p_high}"
        )));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("pooled attention values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = |p: f64| ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(Thresholds {
        tau_low: sorted[rank(p_low) - 1],
        tau_high: sorted[rank(p_high) - 1],
        p_low,
        p_high,
    })
}

/// Strict comparisons; a mean equal to either threshold is Excluded.
pub fn label(mean_attention: f64, thresholds: &Thresholds) -> Label {
    if mean_attention > thresholds.tau_high {
        Label::High
    } else if mean_attention < thresholds.tau_low {
        Label::Low
    } else {
        Label::Excluded
    }
}

/// All candidate window means of all sessions, in session then time order.
pub fn pooled_window_means(sessions: &[SessionRecord], window_seconds: u64) -> Vec<f64> {
    let mut out = Vec::new();
    for s in sessions {
        for end in window_seconds..=s.duration_seconds {
            if let Ok(m) = window_mean_attention(s, end, window_seconds) {
                out.push(m);
            }
        }
    }
    out
}

/// Global thresholds over the whole session pool.
pub fn pooled_thresholds(
    sessions: &[SessionRecord],
    window_seconds: u64,
    p_low: f64,
    p_high: f64,
    source: ThresholdSource,
) -> Result<Thresholds> {
    let values = match source {
        ThresholdSource::WindowMeans => pooled_window_means(sessions, window_seconds),
        ThresholdSource::RawSamples => sessions.iter().flat_map(|s| s.attention.iter().copied()).collect(),
    };
    compute_thresholds(&values, p_low, p_high)
}

/// Builds the labeled dataset: one candidate per `(user, end_second)`,
/// Excluded windows and windows under `min_valid_fraction` dropped. Samples
/// are ordered by user id, then end second.
pub fn build_dataset(
    sessions: &[SessionRecord],
    thresholds: &Thresholds,
    modules: &[ModuleId],
    window_seconds: u64,
    min_valid_fraction: f64,
) -> Result<LabeledDataset> {
    if modules.is_empty() {
        return Err(Error::InvalidParams("at least one module is required".into()));
    }
    if window_seconds == 0 {
        return Err(Error::InvalidParams("window must be at least one second".into()));
    }
    let fps = sessions.first().ok_or(Error::EmptyInput("sessions"))?.fps;
    if let Some(s) = sessions.iter().find(|s| s.fps != fps) {
        return Err(Error::FpsMismatch { expected: fps, found: s.fps });
    }
    let mut modules = modules.to_vec();
    modules.sort();
    modules.dedup();

    let mut order: Vec<&SessionRecord> = sessions.iter().collect();
    order.sort_by(|a, b| a.user_id.cmp(&b.user_id));

    let mut counts = LabelCounts::default();
    let mut samples = Vec::new();
    let mut matrices: BTreeMap<ModuleId, FeatureMatrix> = modules
        .iter()
        .map(|&m| (m, FeatureMatrix::zeros(0, window_seconds as usize * fps as usize * m.dim())))
        .collect();

    for s in order {
        for &m in &modules {
            s.stream(m)?;
        }
        for end in window_seconds..=s.duration_seconds {
            counts.candidates += 1;
            let mean = window_mean_attention(s, end, window_seconds)?;
            let lab = label(mean, thresholds);
            if lab == Label::Excluded {
                counts.excluded += 1;
                continue;
            }
            let valid_fraction = window_valid_fraction(s, &modules, end, window_seconds)?;
            if valid_fraction < min_valid_fraction {
                counts.dropped_invalid += 1;
                continue;
            }
            match lab {
                Label::High => counts.high += 1,
                _ => counts.low += 1,
            }
            for &m in &modules {
                let v = window_slice(s, m, end, window_seconds)?;
                matrices.get_mut(&m).expect("module matrix").push_row(v)?;
            }
            samples.push(WindowSample {
                user_id: s.user_id.clone(),
                end_second: end,
                mean_attention: mean,
                label: lab,
                valid_fraction,
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::NoLabeledSamples);
    }
    let users: BTreeSet<String> = samples.iter().map(|s| s.user_id.clone()).collect();
    Ok(LabeledDataset {
        samples,
        users: users.into_iter().collect(),
        thresholds: *thresholds,
        window_seconds,
        fps,
        min_valid_fraction,
        counts,
        matrices,
    })
}

/// `manifest.json` of a serialized dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub thresholds: Thresholds,
    pub window_seconds: u64,
    pub fps: u32,
    pub min_valid_fraction: f64,
    pub counts: LabelCounts,
    pub n_samples: usize,
    pub users: Vec<String>,
    pub samples_file: String,
    pub modules: Vec<MatrixEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntry {
    pub module: ModuleId,
    pub dim: usize,
    pub rows: usize,
    pub cols: usize,
    /// Raw little-endian f64, row-major.
    pub file: String,
}

const DATASET_FORMAT: &str = "attnfuse-dataset-v1";

pub fn write_dataset(dataset: &LabeledDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv = Vec::new();
    writeln!(csv, "user_id,end_second,mean_attention,label,valid_fraction").expect("vec write");
    for s in &dataset.samples {
        let lab = if s.label == Label::High { "high" } else { "low" };
        writeln!(csv, "{},{},{},{},{}", s.user_id, s.end_second, s.mean_attention, lab, s.valid_fraction)
            .expect("vec write");
    }
    write_atomic(&dir.join("samples.csv"), &csv)?;

    let mut entries = Vec::new();
    for (m, x) in &dataset.matrices {
        let file = format!("{}.f64le", m.as_str());
        let mut bytes = Vec::with_capacity(x.as_slice().len() * 8);
        for v in x.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(&dir.join(&file), &bytes)?;
        entries.push(MatrixEntry {
            module: *m,
            dim: m.dim(),
            rows: x.rows(),
            cols: x.cols(),
            file,
        });
    }
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        thresholds: dataset.thresholds,
        window_seconds: dataset.window_seconds,
        fps: dataset.fps,
        min_valid_fraction: dataset.min_valid_fraction,
        counts: dataset.counts,
        n_samples: dataset.samples.len(),
        users: dataset.users.clone(),
        samples_file: "samples.csv".into(),
        modules: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn read_dataset(dir: &Path) -> Result<LabeledDataset> {
    let manifest: DatasetManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::InvalidInput(format!("unsupported dataset format '{}'", manifest.format)));
    }
    let path = dir.join(&manifest.samples_file);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let mut samples = Vec::with_capacity(manifest.n_samples);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::MalformedRow { line, reason: format!("samples.csv: bad {what}") };
        if rec.len() != 5 {
            return Err(bad("column count"));
        }
        let label = match &rec[3] {
            "high" => Label::High,
            "low" => Label::Low,
            _ => return Err(bad("label")),
        };
        samples.push(WindowSample {
            user_id: rec[0].to_string(),
            end_second: rec[1].parse().map_err(|_| bad("end_second"))?,
            mean_attention: rec[2].parse().map_err(|_| bad("mean_attention"))?,
            label,
            valid_fraction: rec[4].parse().map_err(|_| bad("valid_fraction"))?,
        });
    }
    if samples.len() != manifest.n_samples {
        return Err(Error::DimensionMismatch { expected: manifest.n_samples, found: samples.len() });
    }
    let mut matrices = BTreeMap::new();
    for e in &manifest.modules {
        let p = dir.join(&e.file);
        let bytes = fs::read(&p).map_err(|err| Error::io(&p, err))?;
        if bytes.len() != e.rows * e.cols * 8 {
            return Err(Error::DimensionMismatch { expected: e.rows * e.cols * 8, found: bytes.len() });
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        matrices.insert(e.module, FeatureMatrix::from_vec(e.rows, e.cols, data)?);
    }
    let mut ds = LabeledDataset::from_parts(samples, manifest.thresholds, manifest.window_seconds, manifest.fps, matrices)?;
    ds.min_valid_fraction = manifest.min_valid_fraction;
    ds.counts = manifest.counts;
    Ok(ds)
}
