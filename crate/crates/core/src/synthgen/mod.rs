//! Seeded synthetic sessions with planted attention/feature couplings, and
//! brute-force reference implementations used as test oracles.
//!
//! Attention follows a mean-reverting random walk reflected into `[0, 100]`
//! and rounded to integers like a consumer EEG headset's attention channel.
//! Each module couples to the current attention value `a`:
//!
//! - `eb`: blink onsets at rate `lambda0 * (1 - k_b * a / 100)` per second,
//!   rendered as short runs of frames near 1;
//! - `hp`: yaw/pitch drift plus a nonnegative wander scaled by
//!   `k_p * (1 - a / 100)` (degrees);
//! - `ear`: eye aspect ratio that droops by `k_ear * (1 - a / 100)` and dips
//!   during blinks;
//! - `hd`: head-geometry proxies shifted by `k_hd * (a / 100 - 0.5)`;
//! - `expr`: a 16-d embedding shifted by `k_e * (a / 100 - 0.5)` along a
//!   fixed unit direction, plus unit-variance AR(1) noise.
//!
//! A shared dropout process marks short bursts of frames invalid in every
//! stream at once (face not found), and single frames are occasionally
//! missing from the files altogether.

mod oracle;

use std::path::Path;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    assemble_session, write_user_dir, AttentionSample, AttentionSeries, FeatureFrameSeries, Frame, ModuleId,
    RawSession, SessionRecord,
};

pub use oracle::{brute_force_eer, brute_force_max_accuracy, reference_svm_solve, BruteForceEer, ReferenceSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionProcess {
    /// Level the walk reverts to.
    pub mean: f64,
    /// Fraction of the distance to `mean` recovered per second.
    pub reversion: f64,
    /// Standard deviation of the per-second step.
    pub step_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Couplings {
    /// `k_b` in `[0, 1]`: relative drop of the blink rate at full attention.
    pub blink_slope: f64,
    /// `k_p`: pose wander gain in degrees.
    pub pose_gain: f64,
    /// `k_ear`: eye-openness droop at zero attention.
    pub ear_droop: f64,
    /// `k_hd`: head-distance shift.
    pub head_distance: f64,
    /// `k_e`: expression mean shift.
    pub expression_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevels {
    pub eb: f64,
    pub hp: f64,
    pub ear: f64,
    pub hd: f64,
    /// Lag-one correlation of the per-frame expression noise.
    pub expr_ar: f64,
    /// Standard deviation of per-user feature offsets, in units of each
    /// module's noise level.
    pub user_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dropout {
    /// Expected number of invalid bursts per second.
    pub burst_rate: f64,
    /// Mean burst length in seconds.
    pub burst_seconds: f64,
    /// Probability that a frame is absent from the files.
    pub missing_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub n_users: usize,
    pub duration_seconds: u64,
    pub fps: u32,
    pub seed: u64,
    /// Blink onsets per second at zero attention (`lambda0`).
    pub blink_base_rate: f64,
    pub attention: AttentionProcess,
    pub couplings: Couplings,
    pub noise: NoiseLevels,
    pub dropout: Dropout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Easy,
    Medium,
    Null,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Self::Easy),
            "medium" => Ok(Self::Medium),
            "null" => Ok(Self::Null),
            other => Err(Error::Usage(format!("unknown preset '{other}' (expected easy, medium or null)"))),
        }
    }
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Null => "null",
        }
    }
}

impl SynthParams {
    /// Frozen reference configurations.
    pub fn preset(preset: Preset, n_users: usize, duration_seconds: u64, seed: u64) -> Self {
        let base = Self {
            n_users,
            duration_seconds,
            fps: crate::ingest::DEFAULT_FPS,
            seed,
            blink_base_rate: 0.8,
            attention: AttentionProcess { mean: 50.0, reversion: 0.1, step_std: 12.0 },
            couplings: Couplings {
                blink_slope: 0.95,
                pose_gain: 3.0,
                ear_droop: 0.03,
                head_distance: 0.05,
                expression_shift: 2.0,
            },
            noise: NoiseLevels { eb: 0.03, hp: 2.0, ear: 0.02, hd: 0.05, expr_ar: 0.9, user_offset: 0.2 },
            dropout: Dropout { burst_rate: 0.01, burst_seconds: 1.0, missing_prob: 0.002 },
        };
        match preset {
            Preset::Easy => base,
            Preset::Medium => Self {
                couplings: Couplings {
                    blink_slope: 0.6,
                    pose_gain: 1.5,
                    ear_droop: 0.015,
                    head_distance: 0.02,
                    expression_shift: 1.0,
                },
                noise: NoiseLevels { user_offset: 0.5, ..base.noise },
                ..base
            },
            Preset::Null => Self {
                couplings: Couplings {
                    blink_slope: 0.0,
                    pose_gain: 0.0,
                    ear_droop: 0.0,
                    head_distance: 0.0,
                    expression_shift: 0.0,
                },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.n_users == 0 {
            return bad("n_users must be at least 1");
        }
        if self.duration_seconds == 0 || self.fps == 0 {
            return bad("duration_seconds and fps must be positive");
        }
        let c = &self.couplings;
        let strengths = [c.blink_slope, c.pose_gain, c.ear_droop, c.head_distance, c.expression_shift];
        if strengths.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("coupling strengths must be finite and nonnegative");
        }
        if c.blink_slope > 1.0 {
            return bad("blink_slope must not exceed 1");
        }
        let n = &self.noise;
        if [n.eb, n.hp, n.ear, n.hd, n.user_offset].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("noise levels must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&n.expr_ar) {
            return bad("expr_ar must lie in [0, 1)");
        }
        let a = &self.attention;
        if !(0.0..=100.0).contains(&a.mean) || !(0.0..=1.0).contains(&a.reversion) || !(a.step_std >= 0.0) {
            return bad("attention process parameters out of range");
        }
        if !(self.blink_base_rate >= 0.0) || self.blink_base_rate * 1.0 > self.fps as f64 {
            return bad("blink_base_rate must be in [0, fps]");
        }
        let d = &self.dropout;
        if !(d.burst_rate >= 0.0 && d.burst_seconds >= 0.0) || !(0.0..1.0).contains(&d.missing_prob) {
            return bad("dropout parameters out of range");
        }
        Ok(())
    }

    pub fn user_id(&self, index: usize) -> String {
        let width = self.n_users.to_string().len().max(2);
        format!("user{:0width$}", index + 1)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Per-user stream; stream 0 holds structure shared by all users.
fn user_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Fixed unit direction of the expression shift.
fn expression_direction(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..ModuleId::Expr.dim()).map(|_| normal(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Integer attention values in `[0, 100]`, one per second.
pub fn attention_walk(process: &AttentionProcess, seconds: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = process.step_std / (2.0 * process.reversion.max(1e-6)).sqrt();
    let mut a = (process.mean + sd.min(25.0) * normal(rng)).clamp(0.0, 100.0);
    let mut out = Vec::with_capacity(seconds as usize);
    for _ in 0..seconds {
        out.push(a.round());
        a += process.reversion * (process.mean - a) + process.step_std * normal(rng);
        // reflect at the bounds
        if a < 0.0 {
            a = -a;
        }
        if a > 100.0 {
            a = 200.0 - a;
        }
        a = a.clamp(0.0, 100.0);
    }
    out
}

fn generate_user(params: &SynthParams, index: usize, direction: &[f64]) -> RawSession {
    let mut rng = user_rng(params.seed, index);
    let fps = params.fps as usize;
    let attention = attention_walk(&params.attention, params.duration_seconds, &mut rng);
    let n_frames = attention.len() * fps;
    let c = &params.couplings;
    let nz = &params.noise;

    let off = nz.user_offset;
    let hp_drift: Vec<f64> = (0..2).map(|_| off * nz.hp * normal(&mut rng)).collect();
    let ear_base = 0.3 + off * nz.ear * normal(&mut rng);
    let hd_base: Vec<f64> = (0..4).map(|k| 1.0 + 0.1 * k as f64 + off * nz.hd * normal(&mut rng)).collect();
    let expr_base: Vec<f64> = (0..direction.len()).map(|_| off * normal(&mut rng)).collect();

    let blink_len = ((0.13 * params.fps as f64).round() as usize).max(1);
    let mut blink_left = 0usize;
    let mut drop_left = 0usize;
    let mut wander = [0.0f64; 2];
    let wander_ar = 0.98f64;
    let mut expr_noise: Vec<f64> = (0..direction.len()).map(|_| normal(&mut rng)).collect();
    let innovation = (1.0 - nz.expr_ar * nz.expr_ar).sqrt();

    let mut streams: Vec<FeatureFrameSeries> = [ModuleId::Eb, ModuleId::Hp, ModuleId::Ear, ModuleId::Hd, ModuleId::Expr]
        .into_iter()
        .map(|module| FeatureFrameSeries { module, fps: params.fps, frames: Vec::with_capacity(n_frames) })
        .collect();

    for f in 0..n_frames {
        let a = attention[f / fps] / 100.0;

        if blink_left == 0 {
            let rate = params.blink_base_rate * (1.0 - c.blink_slope * a);
            if rng.random::<f64>() < rate / params.fps as f64 {
                blink_left = blink_len;
            }
        }
        let blinking = blink_left > 0;
        blink_left = blink_left.saturating_sub(1);

        if drop_left == 0 && params.dropout.burst_rate > 0.0 && rng.random::<f64>() < params.dropout.burst_rate / params.fps as f64 {
            let len = params.dropout.burst_seconds * params.fps as f64 * (0.5 + rng.random::<f64>());
            drop_left = (len.round() as usize).max(1);
        }
        let valid = drop_left == 0;
        drop_left = drop_left.saturating_sub(1);
        let missing = rng.random::<f64>() < params.dropout.missing_prob;

        let eb = if blinking { 1.0 - (nz.eb * normal(&mut rng)).abs() } else { (nz.eb * normal(&mut rng)).abs() };
        let eb = eb.clamp(0.0, 1.0);

        let mut hp = [0.0; 2];
        for k in 0..2 {
            wander[k] = wander_ar * wander[k] + (1.0 - wander_ar * wander_ar).sqrt() * normal(&mut rng);
            hp[k] = hp_drift[k] + c.pose_gain * (1.0 - a) * (0.5 + wander[k].abs()) + nz.hp * normal(&mut rng);
        }

        let openness = ear_base - c.ear_droop * (1.0 - a);
        let ear: Vec<f64> = (0..2)
            .map(|_| {
                let v = if blinking { 0.3 * openness } else { openness };
                v + nz.ear * normal(&mut rng)
            })
            .collect();

        let hd: Vec<f64> = hd_base.iter().map(|b| b + c.head_distance * (a - 0.5) + nz.hd * normal(&mut rng)).collect();

        let shift = c.expression_shift * (a - 0.5);
        for e in expr_noise.iter_mut() {
            *e = nz.expr_ar * *e + innovation * normal(&mut rng);
        }
        let expr: Vec<f64> = (0..direction.len()).map(|k| expr_base[k] + shift * direction[k] + expr_noise[k]).collect();

        if missing {
            continue;
        }
        let values: [Vec<f64>; 5] = [vec![eb], hp.to_vec(), ear, hd, expr];
        for (s, v) in streams.iter_mut().zip(values) {
            let v = if valid { v } else { vec![0.0; v.len()] };
            s.frames.push(Frame { index: f as u64, values: v, valid });
        }
    }

    streams.sort_by_key(|s| s.module);
    RawSession {
        user_id: params.user_id(index),
        streams,
        attention: AttentionSeries {
            samples: attention
                .iter()
                .enumerate()
                .map(|(s, &attention)| AttentionSample { second: s as u64, attention })
                .collect(),
        },
    }
}

/// Raw per-user streams, ordered by user id.
pub fn generate_raw(params: &SynthParams) -> Result<Vec<RawSession>> {
    params.validate()?;
    let direction = expression_direction(params.seed);
    Ok((0..params.n_users).map(|u| generate_user(params, u, &direction)).collect())
}

/// Aligned sessions, ordered by user id.
pub fn generate_sessions(params: &SynthParams) -> Result<Vec<SessionRecord>> {
    generate_raw(params)?
        .into_iter()
        .map(|raw| assemble_session(&raw.user_id, raw.streams, raw.attention, params.fps))
        .collect()
}

/// Writes one `<user_id>/` directory per generated user under `root`.
pub fn write_sessions(params: &SynthParams, root: &Path) -> Result<Vec<String>> {
    params.validate()?;
    let direction = expression_direction(params.seed);
    let mut ids = Vec::with_capacity(params.n_users);
    for u in 0..params.n_users {
        // one user at a time keeps memory flat for long sessions
        let raw = generate_user(params, u, &direction);
        write_user_dir(root, &raw)?;
        ids.push(raw.user_id);
    }
    Ok(ids)
}

/// Number of blink onsets (0 -> 1 transitions of the thresholded signal) in
/// a window of eye-blink frames.
pub fn count_blinks(frames: &[f64]) -> usize {
    let mut prev = false;
    let mut n = 0;
    for &v in frames {
        let on = v > 0.5;
        if on && !prev {
            n += 1;
        }
        prev = on;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_session_dir, read_user_dir};

    fn small(preset: Preset, seed: u64) -> SynthParams {
        SynthParams { fps: 5, ..SynthParams::preset(preset, 2, 120, seed) }
    }

    #[test]
    fn same_seed_same_sessions() {
        let a = generate_sessions(&small(Preset::Easy, 7)).unwrap();
        let b = generate_sessions(&small(Preset::Easy, 7)).unwrap();
        assert_eq!(a, b);
        let c = generate_sessions(&small(Preset::Easy, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn users_are_independent_of_user_count() {
        let two = generate_raw(&small(Preset::Medium, 3)).unwrap();
        let three = generate_raw(&SynthParams { n_users: 3, ..small(Preset::Medium, 3) }).unwrap();
        assert_eq!(two[0], three[0]);
        assert_eq!(two[1], three[1]);
    }

    #[test]
    fn zero_users_is_rejected() {
        let p = SynthParams { n_users: 0, ..small(Preset::Null, 1) };
        assert!(matches!(generate_sessions(&p), Err(Error::InvalidParams(_))));
        let p = SynthParams { couplings: Couplings { pose_gain: -1.0, ..p.couplings }, n_users: 1, ..p };
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn written_sessions_round_trip_through_ingest() {
        let p = small(Preset::Easy, 11);
        let dir = tempfile::tempdir().unwrap();
        let ids = write_sessions(&p, dir.path()).unwrap();
        assert_eq!(ids, vec!["user01", "user02"]);
        let raw = generate_raw(&p).unwrap();
        assert_eq!(read_user_dir(&dir.path().join("user01"), p.fps).unwrap(), raw[0]);
        let loaded = load_session_dir(dir.path(), p.fps).unwrap();
        assert_eq!(loaded, generate_sessions(&p).unwrap());
    }

    #[test]
    fn attention_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let proc_ = AttentionProcess { mean: 50.0, reversion: 0.001, step_std: 30.0 };
        let a = attention_walk(&proc_, 5000, &mut rng);
        assert!(a.iter().all(|v| (0.0..=100.0).contains(v) && v.fract() == 0.0));
    }

    #[test]
    fn low_attention_windows_blink_more() {
        use crate::windowing::{build_dataset, pooled_thresholds, ThresholdSource};
        for seed in 0..10 {
            let p = SynthParams { fps: 10, ..SynthParams::preset(Preset::Easy, 3, 600, seed) };
            let sessions = generate_sessions(&p).unwrap();
            let th = pooled_thresholds(&sessions, 60, 10.0, 90.0, ThresholdSource::WindowMeans).unwrap();
            let ds = build_dataset(&sessions, &th, &[ModuleId::Eb], 60, 0.8).unwrap();
            let (mut hi, mut lo) = ((0.0, 0usize), (0.0, 0usize));
            for (i, s) in ds.samples.iter().enumerate() {
                let n = count_blinks(ds.vector(ModuleId::Eb, i).unwrap()) as f64;
                if s.label.is_high() {
                    hi = (hi.0 + n, hi.1 + 1);
                } else {
                    lo = (lo.0 + n, lo.1 + 1);
                }
            }
            assert!(lo.0 / lo.1 as f64 > hi.0 / hi.1 as f64, "seed {seed}");
        }
    }
}
