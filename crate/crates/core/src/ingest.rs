//! Per-frame feature streams, the 1 Hz attention series, and their alignment
//! into per-user session records.
//!
//! On-disk layout of a session directory:
//!
//! ```text
//! <session_dir>/<user_id>/attention.csv   second_index,attention
//! <session_dir>/<user_id>/<module>.csv    frame_index,valid,f_0,...,f_{d-1}
//! ```
//!
//! with `<module>` one of `eb`, `hp`, `ear`, `hd`, `expr`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPS: u32 = 30;

/// Face-analysis module producing one per-frame feature vector.
///
/// Variants are declared in the lexicographic order of their lowercase ids so
/// that the derived `Ord` matches the canonical subset naming (`eb+expr+hp`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleId {
    /// Eye aspect ratio, one value per eye.
    Ear,
    /// Eye-blink detector output in `[0, 1]`.
    Eb,
    /// Facial expression embedding.
    Expr,
    /// Head-distance proxies: nose width/length and head width/length.
    Hd,
    /// Head pose: pitch and yaw.
    Hp,
}

impl ModuleId {
    pub const ALL: [ModuleId; 5] = [
        ModuleId::Ear,
        ModuleId::Eb,
        ModuleId::Expr,
        ModuleId::Hd,
        ModuleId::Hp,
    ];

    pub fn dim(self) -> usize {
        match self {
            ModuleId::Eb => 1,
            ModuleId::Hp => 2,
            ModuleId::Ear => 2,
            ModuleId::Hd => 4,
            ModuleId::Expr => 16,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleId::Ear => "ear",
            ModuleId::Eb => "eb",
            ModuleId::Expr => "expr",
            ModuleId::Hd => "hd",
            ModuleId::Hp => "hp",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.as_str())
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModuleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        ModuleId::ALL
            .into_iter()
            .find(|m| m.as_str() == t)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown module '{s}'; valid ids: eb, hp, ear, hd, expr"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub values: Vec<f64>,
    pub valid: bool,
}

/// Parsed per-frame output of one module for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrameSeries {
    pub module: ModuleId,
    pub fps: u32,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionSample {
    pub second: u64,
    pub attention: f64,
}

/// 1 Hz attention level in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionSeries {
    pub samples: Vec<AttentionSample>,
}

impl AttentionSeries {
    /// Missing runs of seconds as `(first_missing_second, length)`.
    pub fn gaps(&self) -> Vec<Gap> {
        let mut gaps = Vec::new();
        let mut expected = 0u64;
        for s in &self.samples {
            if s.second > expected {
                gaps.push(Gap {
                    start: expected,
                    length: s.second - expected,
                });
            }
            expected = s.second + 1;
        }
        gaps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub start: u64,
    pub length: u64,
}

/// Everything read from one user directory, before alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub user_id: String,
    pub streams: Vec<FeatureFrameSeries>,
    pub attention: AttentionSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Valid,
    /// Present in the stream but flagged `valid=0`; values carried forward.
    Invalid,
    /// Absent from the stream; values carried forward.
    Missing,
}

/// A stream resampled onto the session clock: exactly
/// `duration_seconds * fps` slots of `dim` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedStream {
    pub module: ModuleId,
    pub values: Vec<f64>,
    pub status: Vec<FrameStatus>,
    /// Frames dropped because they fall past the attention series.
    pub truncated: usize,
}

impl AlignedStream {
    pub fn slots(&self) -> usize {
        self.status.len()
    }

    pub fn frame(&self, slot: usize) -> &[f64] {
        let d = self.module.dim();
        &self.values[slot * d..(slot + 1) * d]
    }
}

/// One user's aligned streams plus a dense per-second attention trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub user_id: String,
    pub fps: u32,
    pub duration_seconds: u64,
    pub streams: BTreeMap<ModuleId, AlignedStream>,
    /// One value per second; seconds inside a gap repeat the last sample.
    pub attention: Vec<f64>,
    pub attention_gaps: Vec<Gap>,
}

impl SessionRecord {
    pub fn stream(&self, module: ModuleId) -> Result<&AlignedStream> {
        self.streams
            .get(&module)
            .ok_or(Error::MissingModule(module))
    }

    pub fn modules(&self) -> Vec<ModuleId> {
        self.streams.keys().copied().collect()
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn malformed(line: u64, reason: impl Into<String>) -> Error {
    Error::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    malformed(line, e.to_string())
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| malformed(line, format!("column {column}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("column {column}: non-finite value")));
    }
    Ok(v)
}

fn parse_u64(field: &str, line: u64, column: &str) -> Result<u64> {
    field.parse().map_err(|_| {
        malformed(
            line,
            format!("column {column}: '{field}' is not a non-negative integer"),
        )
    })
}

/// Parses `frame_index,valid,f_0,...,f_{d-1}` for `module`.
///
/// Rows flagged `valid=0` keep whatever placeholder values they carry (they
/// must still be finite numbers); range checks apply to valid rows only.
pub fn parse_frame_features<R: Read>(input: R, module: ModuleId, fps: u32) -> Result<FeatureFrameSeries> {
    if fps == 0 {
        return Err(Error::InvalidParams("fps must be positive".into()));
    }
    let d = module.dim();
    let mut rdr = csv_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < 2 || &header[0] != "frame_index" || &header[1] != "valid" {
        return Err(malformed(1, "header must start with frame_index,valid"));
    }
    let found = header.len() - 2;
    if found != d {
        return Err(Error::DimensionMismatch { expected: d, found });
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("f_{k}") {
            return Err(malformed(1, format!("feature column {k} must be named f_{k}, got '{name}'")));
        }
    }

    let mut frames = Vec::new();
    let mut last: Option<u64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        if rec.len() != d + 2 {
            return Err(malformed(
                line,
                format!("expected {} columns, found {}", d + 2, rec.len()),
            ));
        }
        let index = parse_u64(&rec[0], line, "frame_index")?;
        let valid = match &rec[1] {
            "1" => true,
            "0" => false,
            other => return Err(malformed(line, format!("valid must be 0 or 1, got '{other}'"))),
        };
        if let Some(prev) = last {
            if index <= prev {
                return Err(Error::NonMonotonicIndex { line, index });
            }
        }
        last = Some(index);
        let mut values = Vec::with_capacity(d);
        for k in 0..d {
            let v = parse_f64(&rec[k + 2], line, &format!("f_{k}"))?;
            if valid && module == ModuleId::Eb && !(0.0..=1.0).contains(&v) {
                return Err(malformed(line, format!("eye-blink value {v} outside [0, 1]")));
            }
            values.push(v);
        }
        frames.push(Frame { index, values, valid });
    }
    Ok(FeatureFrameSeries { module, fps, frames })
}

/// Writes a series in the format accepted by [`parse_frame_features`].
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_frame_features<W: Write>(series: &FeatureFrameSeries, out: W) -> Result<()> {
    let d = series.module.dim();
    let mut w = std::io::BufWriter::new(out);
    let mut line = String::from("frame_index,valid");
    for k in 0..d {
        line.push_str(&format!(",f_{k}"));
    }
    writeln!(w, "{line}").map_err(|e| Error::io("<frame stream>", e))?;
    for f in &series.frames {
        line.clear();
        line.push_str(&f.index.to_string());
        line.push_str(if f.valid { ",1" } else { ",0" });
        for v in &f.values {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(|e| Error::io("<frame stream>", e))?;
    }
    w.flush().map_err(|e| Error::io("<frame stream>", e))
}

/// Parses `second_index,attention`. The series must start at second 0.
pub fn parse_attention<R: Read>(input: R) -> Result<AttentionSeries> {
    let mut rdr = csv_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() != 2 || &header[0] != "second_index" || &header[1] != "attention" {
        return Err(malformed(1, "header must be second_index,attention"));
    }
    let mut samples: Vec<AttentionSample> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        if rec.len() != 2 {
            return Err(malformed(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let second = parse_u64(&rec[0], line, "second_index")?;
        let attention = parse_f64(&rec[1], line, "attention")?;
        if !(0.0..=100.0).contains(&attention) {
            return Err(Error::OutOfRange {
                line,
                value: attention,
                min: 0.0,
                max: 100.0,
            });
        }
        match samples.last() {
            Some(prev) if second <= prev.second => {
                return Err(Error::NonMonotonicIndex { line, index: second });
            }
            None if second != 0 => {
                return Err(malformed(line, "attention series must start at second 0"));
            }
            _ => {}
        }
        samples.push(AttentionSample { second, attention });
    }
    Ok(AttentionSeries { samples })
}

pub fn write_attention<W: Write>(series: &AttentionSeries, out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    let io = |e| Error::io("<attention stream>", e);
    writeln!(w, "second_index,attention").map_err(io)?;
    for s in &series.samples {
        writeln!(w, "{},{}", s.second, s.attention).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Aligns streams onto the clock defined by the attention series.
///
/// Missing and invalid frames take the values of the last valid frame (the
/// first valid frame for slots before it); frames past the attention range
/// are dropped.
pub fn assemble_session(
    user_id: &str,
    streams: Vec<FeatureFrameSeries>,
    attention: AttentionSeries,
    fps: u32,
) -> Result<SessionRecord> {
    if fps == 0 {
        return Err(Error::InvalidParams("fps must be positive".into()));
    }
    let last = attention
        .samples
        .last()
        .ok_or(Error::EmptyInput("attention series"))?;
    let duration_seconds = last.second + 1;

    let mut dense = Vec::with_capacity(duration_seconds as usize);
    for s in &attention.samples {
        while (dense.len() as u64) < s.second {
            let prev = *dense.last().expect("series starts at second 0");
            dense.push(prev);
        }
        dense.push(s.attention);
    }
    let attention_gaps = attention.gaps();

    let slots = (duration_seconds * fps as u64) as usize;
    let mut aligned = BTreeMap::new();
    for series in streams {
        if series.fps != fps {
            return Err(Error::FpsMismatch {
                expected: fps,
                found: series.fps,
            });
        }
        let module = series.module;
        if aligned.contains_key(&module) {
            return Err(Error::InvalidInput(format!(
                "duplicate {module} stream for user {user_id}"
            )));
        }
        aligned.insert(module, align_stream(series, slots)?);
    }

    Ok(SessionRecord {
        user_id: user_id.to_string(),
        fps,
        duration_seconds,
        streams: aligned,
        attention: dense,
        attention_gaps,
    })
}

fn align_stream(series: FeatureFrameSeries, slots: usize) -> Result<AlignedStream> {
    let module = series.module;
    let d = module.dim();
    let first_valid = series
        .frames
        .iter()
        .find(|f| f.valid && (f.index as usize) < slots)
        .ok_or(Error::NoValidFrames(module))?;

    let mut values = Vec::with_capacity(slots * d);
    let mut status = Vec::with_capacity(slots);
    let mut carry: &[f64] = &first_valid.values;
    let mut frames = series.frames.iter().peekable();
    for slot in 0..slots as u64 {
        match frames.peek() {
            Some(f) if f.index == slot => {
                if f.values.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: f.values.len(),
                    });
                }
                if f.valid {
                    carry = &f.values;
                    status.push(FrameStatus::Valid);
                } else {
                    status.push(FrameStatus::Invalid);
                }
                frames.next();
            }
            _ => status.push(FrameStatus::Missing),
        }
        values.extend_from_slice(carry);
    }
    let truncated = frames.count();
    Ok(AlignedStream {
        module,
        values,
        status,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamIntegrity {
    pub total_frames: usize,
    pub valid_frames: usize,
    pub invalid_frames: usize,
    pub missing_frames: usize,
    pub truncated_frames: usize,
    pub valid_fraction: f64,
    /// Fraction of slots holding carried-forward values (invalid + missing).
    pub filled_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub user_id: String,
    pub fps: u32,
    pub duration_seconds: u64,
    pub modules: BTreeMap<ModuleId, StreamIntegrity>,
    pub attention_gaps: Vec<Gap>,
}

pub fn session_integrity_report(session: &SessionRecord) -> IntegrityReport {
    let modules = session
        .streams
        .iter()
        .map(|(&m, s)| {
            let total = s.slots();
            let count = |want: FrameStatus| s.status.iter().filter(|&&st| st == want).count();
            let valid = count(FrameStatus::Valid);
            let invalid = count(FrameStatus::Invalid);
            let missing = count(FrameStatus::Missing);
            let frac = |k: usize| if total == 0 { 0.0 } else { k as f64 / total as f64 };
            (
                m,
                StreamIntegrity {
                    total_frames: total,
                    valid_frames: valid,
                    invalid_frames: invalid,
                    missing_frames: missing,
                    truncated_frames: s.truncated,
                    valid_fraction: frac(valid),
                    filled_fraction: frac(invalid + missing),
                },
            )
        })
        .collect();
    IntegrityReport {
        user_id: session.user_id.clone(),
        fps: session.fps,
        duration_seconds: session.duration_seconds,
        modules,
        attention_gaps: session.attention_gaps.clone(),
    }
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads one `<user_id>/` directory: `attention.csv` plus whichever module
/// files are present.
pub fn read_user_dir(dir: &Path, fps: u32) -> Result<RawSession> {
    let user_id = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad user directory {}", dir.display())))?
        .to_string();
    let attention = parse_attention(open(&dir.join("attention.csv"))?)
        .map_err(|e| annotate(e, &dir.join("attention.csv")))?;
    let mut streams = Vec::new();
    for m in ModuleId::ALL {
        let p = dir.join(m.file_name());
        if p.exists() {
            streams.push(parse_frame_features(open(&p)?, m, fps).map_err(|e| annotate(e, &p))?);
        }
    }
    Ok(RawSession {
        user_id,
        streams,
        attention,
    })
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::MalformedRow { line, reason } => Error::MalformedRow {
            line,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    }
}

/// Loads every user directory under `root`, sorted by user id.
pub fn load_session_dir(root: &Path, fps: u32) -> Result<Vec<SessionRecord>> {
    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("attention.csv").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no user directories with attention.csv under {}",
            root.display()
        )));
    }
    dirs.iter()
        .map(|d| {
            let raw = read_user_dir(d, fps)?;
            assemble_session(&raw.user_id, raw.streams, raw.attention, fps)
        })
        .collect()
}

/// Writes a raw session into `<root>/<user_id>/`.
pub fn write_user_dir(root: &Path, raw: &RawSession) -> Result<()> {
    let dir = root.join(&raw.user_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut buf = Vec::new();
    write_attention(&raw.attention, &mut buf)?;
    crate::output::write_atomic(&dir.join("attention.csv"), &buf)?;
    for s in &raw.streams {
        buf.clear();
        write_frame_features(s, &mut buf)?;
        crate::output::write_atomic(&dir.join(s.module.file_name()), &buf)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(module: ModuleId, fps: u32, frames: impl IntoIterator<Item = (u64, Vec<f64>, bool)>) -> FeatureFrameSeries {
        FeatureFrameSeries {
            module,
            fps,
            frames: frames
                .into_iter()
                .map(|(index, values, valid)| Frame { index, values, valid })
                .collect(),
        }
    }

    fn constant_attention(seconds: u64, value: f64) -> AttentionSeries {
        AttentionSeries {
            samples: (0..seconds)
                .map(|second| AttentionSample { second, attention: value })
                .collect(),
        }
    }

    #[test]
    fn parses_head_pose_rows() {
        let csv = "frame_index,valid,f_0,f_1\n0,1,1.5,-2\n1,1,0.25,3\n2,0,0,0\n";
        let s = parse_frame_features(csv.as_bytes(), ModuleId::Hp, 30).unwrap();
        assert_eq!(s.frames.len(), 3);
        assert!(s.frames.iter().all(|f| f.values.len() == 2));
        assert!(!s.frames[2].valid);
    }

    #[test]
    fn header_dimension_mismatch() {
        let csv = "frame_index,valid,f_0,f_1,f_2,f_3,f_4\n";
        let err = parse_frame_features(csv.as_bytes(), ModuleId::Ear, 30).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 5 }));
    }

    #[test]
    fn blink_value_out_of_range_is_rejected() {
        let csv = "frame_index,valid,f_0\n0,1,0.2\n1,1,1.3\n";
        let err = parse_frame_features(csv.as_bytes(), ModuleId::Eb, 30).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn wrong_column_count_and_non_numeric() {
        let short = "frame_index,valid,f_0,f_1\n0,1,1.0\n";
        assert!(matches!(
            parse_frame_features(short.as_bytes(), ModuleId::Hp, 30),
            Err(Error::MalformedRow { .. })
        ));
        let nan = "frame_index,valid,f_0,f_1\n0,1,abc,1\n";
        assert!(matches!(
            parse_frame_features(nan.as_bytes(), ModuleId::Hp, 30),
            Err(Error::MalformedRow { .. })
        ));
    }

    #[test]
    fn frame_indices_must_increase() {
        let csv = "frame_index,valid,f_0\n5,1,0.1\n5,1,0.2\n";
        assert!(matches!(
            parse_frame_features(csv.as_bytes(), ModuleId::Eb, 30),
            Err(Error::NonMonotonicIndex { index: 5, .. })
        ));
    }

    #[test]
    fn attention_examples() {
        let ok = parse_attention("second_index,attention\n0,50\n1,60\n".as_bytes()).unwrap();
        assert_eq!(ok.samples.len(), 2);
        assert!(matches!(
            parse_attention("second_index,attention\n0,101\n".as_bytes()),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            parse_attention("second_index,attention\n0,50\n0,60\n".as_bytes()),
            Err(Error::NonMonotonicIndex { .. })
        ));
    }

    #[test]
    fn complete_session_has_no_fills() {
        let eb = series(ModuleId::Eb, 30, (0..1800).map(|i| (i, vec![0.1], true)));
        let s = assemble_session("u1", vec![eb], constant_attention(60, 50.0), 30).unwrap();
        assert_eq!(s.duration_seconds, 60);
        let r = session_integrity_report(&s);
        let eb = &r.modules[&ModuleId::Eb];
        assert_eq!(eb.total_frames, 1800);
        assert_eq!(eb.valid_fraction, 1.0);
        assert_eq!(eb.filled_fraction, 0.0);
    }

    #[test]
    fn missing_frames_are_carried_forward() {
        let frames = (0..1800u64)
            .filter(|i| !(30..60).contains(i))
            .map(|i| (i, vec![i as f64 / 1800.0], true));
        let eb = series(ModuleId::Eb, 30, frames);
        let s = assemble_session("u1", vec![eb], constant_attention(60, 50.0), 30).unwrap();
        let stream = s.stream(ModuleId::Eb).unwrap();
        for slot in 30..60 {
            assert_eq!(stream.frame(slot), &[29.0 / 1800.0]);
            assert_eq!(stream.status[slot], FrameStatus::Missing);
        }
        let r = session_integrity_report(&s);
        let eb = &r.modules[&ModuleId::Eb];
        assert_eq!(eb.missing_frames, 30);
        assert!((eb.filled_fraction - 30.0 / 1800.0).abs() < 1e-15);
    }

    #[test]
    fn leading_invalid_frames_use_first_valid_values() {
        let hp = series(
            ModuleId::Hp,
            2,
            vec![(0, vec![9.0, 9.0], false), (1, vec![1.0, 2.0], true), (2, vec![3.0, 4.0], true)],
        );
        let s = assemble_session("u", vec![hp], constant_attention(2, 10.0), 2).unwrap();
        let st = s.stream(ModuleId::Hp).unwrap();
        assert_eq!(st.frame(0), &[1.0, 2.0]);
        assert_eq!(st.frame(3), &[3.0, 4.0]);
        assert_eq!(st.status, vec![FrameStatus::Invalid, FrameStatus::Valid, FrameStatus::Valid, FrameStatus::Missing]);
    }

    #[test]
    fn frames_past_attention_are_truncated() {
        let eb = series(ModuleId::Eb, 2, (0..10).map(|i| (i, vec![0.0], true)));
        let s = assemble_session("u", vec![eb], constant_attention(3, 10.0), 2).unwrap();
        let st = s.stream(ModuleId::Eb).unwrap();
        assert_eq!(st.slots(), 6);
        assert_eq!(st.truncated, 4);
    }

    #[test]
    fn fps_mismatch_and_no_valid_frames() {
        let a = series(ModuleId::Eb, 30, vec![(0, vec![0.0], true)]);
        let b = series(ModuleId::Hp, 25, vec![(0, vec![0.0, 0.0], true)]);
        assert!(matches!(
            assemble_session("u", vec![a, b], constant_attention(1, 1.0), 30),
            Err(Error::FpsMismatch { expected: 30, found: 25 })
        ));
        let dead = series(ModuleId::Eb, 30, vec![(0, vec![0.0], false)]);
        assert!(matches!(
            assemble_session("u", vec![dead], constant_attention(1, 1.0), 30),
            Err(Error::NoValidFrames(ModuleId::Eb))
        ));
    }

    #[test]
    fn attention_gaps_are_reported_and_filled() {
        let att = parse_attention("second_index,attention\n0,10\n1,20\n4,50\n".as_bytes()).unwrap();
        assert_eq!(att.gaps(), vec![Gap { start: 2, length: 2 }]);
        let eb = series(ModuleId::Eb, 1, (0..5).map(|i| (i, vec![0.0], true)));
        let s = assemble_session("u", vec![eb], att, 1).unwrap();
        assert_eq!(s.attention, vec![10.0, 20.0, 20.0, 20.0, 50.0]);
        assert_eq!(session_integrity_report(&s).attention_gaps, vec![Gap { start: 2, length: 2 }]);
    }

    #[test]
    fn module_ids_parse_and_order() {
        assert_eq!("EXPR".parse::<ModuleId>().unwrap(), ModuleId::Expr);
        assert!(matches!("xyz".parse::<ModuleId>(), Err(Error::Usage(_))));
        let mut v = vec![ModuleId::Hp, ModuleId::Eb, ModuleId::Expr];
        v.sort();
        assert_eq!(v, vec![ModuleId::Eb, ModuleId::Expr, ModuleId::Hp]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_series() -> impl Strategy<Value = FeatureFrameSeries> {
            (
                prop::sample::select(ModuleId::ALL.to_vec()),
                prop::collection::vec((1u64..5, any::<bool>(), prop::collection::vec(-1e6f64..1e6, 16)), 0..40),
            )
                .prop_map(|(module, rows)| {
                    let mut index = 0;
                    let frames = rows
                        .into_iter()
                        .map(|(step, valid, vals)| {
                            index += step;
                            let values = vals[..module.dim()]
                                .iter()
                                .map(|v| if module == ModuleId::Eb { (v.abs() / 1e6).min(1.0) } else { *v })
                                .collect();
                            Frame { index, values, valid }
                        })
                        .collect();
                    FeatureFrameSeries { module, fps: 30, frames }
                })
        }

        proptest! {
            #[test]
            fn frame_csv_round_trips_bit_exactly(s in arb_series()) {
                let mut buf = Vec::new();
                write_frame_features(&s, &mut buf).unwrap();
                let back = parse_frame_features(buf.as_slice(), s.module, 30).unwrap();
                prop_assert_eq!(back.frames.len(), s.frames.len());
                for (a, b) in back.frames.iter().zip(&s.frames) {
                    prop_assert_eq!(a.index, b.index);
                    prop_assert_eq!(a.valid, b.valid);
                    let abits: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
                    let bbits: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(abits, bbits);
                }
            }

            #[test]
            fn assembled_streams_have_exact_slot_count(
                secs in 1u64..20,
                fps in 1u32..8,
                keep in prop::collection::vec(any::<bool>(), 200),
            ) {
                let frames: Vec<_> = (0..(secs + 2) * fps as u64)
                    .filter(|&i| keep[i as usize % keep.len()] || i == 0)
                    .map(|i| (i, vec![0.5], true))
                    .collect();
                let eb = series(ModuleId::Eb, fps, frames);
                let s = assemble_session("u", vec![eb], constant_attention(secs, 40.0), fps).unwrap();
                prop_assert_eq!(s.stream(ModuleId::Eb).unwrap().slots() as u64, secs * fps as u64);
                prop_assert_eq!(s.attention.len() as u64, s.duration_seconds);
            }
        }
    }
}
