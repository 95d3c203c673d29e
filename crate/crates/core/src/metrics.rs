//! ROC, equal error rate, accuracy-optimal thresholds and score densities.
//!
//! Convention throughout: a sample is predicted High when `score >= tau`.
//! Labels are `true` for High (the positive class).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of abscissae of a [`DensityEstimate`].
pub const KDE_GRID_POINTS: usize = 512;
/// Lower bound on the kernel bandwidth.
pub const MIN_BANDWIDTH: f64 = 1e-3;

/// `f64` that may be infinite; serialized as a number or as `"inf"`/`"-inf"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Str(if *v > 0.0 { "inf" } else { "-inf" }.into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "extended_float")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Points ordered by increasing threshold, from `-inf` (everything High) to
/// `+inf` (everything Low).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Smallest and largest realized score, used to express sentinel
    /// thresholds as concrete operating points.
    pub score_range: (f64, f64),
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: labels.len() });
    }
    if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {v}")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((n_pos, n_neg))
}

/// Thresholds: `-inf`, midpoints of consecutive distinct scores, `+inf`.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut t = Vec::with_capacity(s.len() + 1);
    t.push(f64::NEG_INFINITY);
    t.extend(s.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    t.push(f64::INFINITY);
    t
}

pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let thresholds = candidate_thresholds(scores);

    // Sweep upward: counts of samples with score >= t.
    let (mut tp, mut fp) = (n_pos, n_neg);
    let mut k = 0;
    let mut points = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        while k < pairs.len() && pairs[k].0 < t {
            if pairs[k].1 { tp -= 1 } else { fp -= 1 }
            k += 1;
        }
        points.push(RocPoint { threshold: t, fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64 });
    }
    Ok(RocCurve { points, n_pos, n_neg, score_range: (pairs[0].0, pairs[pairs.len() - 1].0) })
}

impl RocCurve {
    /// Threshold with sentinels replaced by the nearest realized score.
    fn finite_threshold(&self, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            self.score_range.0
        } else if t == f64::INFINITY {
            self.score_range.1
        } else {
            t
        }
    }

    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[0].fpr - w[1].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
            .sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["threshold", "fpr", "tpr"]).map_err(|e| Error::InvalidInput(e.to_string()))?;
            for p in &self.points {
                w.write_record([fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)])
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        crate::output::write_atomic(path, &buf)
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Equal error rate and its threshold.
///
/// Walks the curve by increasing threshold, where `FPR - FNR` is
/// non-increasing, and stops at the first point where it is `<= 0`. An exact
/// zero is taken as is (the smaller threshold wins ties); otherwise both
/// rates are interpolated linearly between the bracketing points.
pub fn eer(curve: &RocCurve) -> (f64, f64) {
    let p = &curve.points;
    let gap = |q: &RocPoint| q.fpr - (1.0 - q.tpr);
    let j = p.iter().position(|q| gap(q) <= 0.0).unwrap_or(p.len() - 1);
    if j == 0 || gap(&p[j]) == 0.0 {
        return (p[j].fpr, curve.finite_threshold(p[j].threshold));
    }
    let (a, b) = (&p[j - 1], &p[j]);
    let (ga, gb) = (gap(a), gap(b));
    let frac = ga / (ga - gb);
    let rate = a.fpr + frac * (b.fpr - a.fpr);
    let (ta, tb) = (curve.finite_threshold(a.threshold), curve.finite_threshold(b.threshold));
    (rate, ta + frac * (tb - ta))
}

/// Best accuracy over the ROC threshold set and its threshold; ties go to the
/// smaller threshold.
pub fn max_accuracy(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    Ok(max_accuracy_on(&roc(scores, labels)?))
}

pub fn max_accuracy_on(curve: &RocCurve) -> (f64, f64) {
    let (np, nn) = (curve.n_pos as f64, curve.n_neg as f64);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for q in &curve.points {
        let correct = (q.tpr * np).round() + ((1.0 - q.fpr) * nn).round();
        let acc = correct / (np + nn);
        if acc > best.0 {
            best = (acc, q.threshold);
        }
    }
    best
}

/// Error rates at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedThresholdStats {
    pub threshold: f64,
    pub accuracy: f64,
    pub fpr: f64,
    pub fnr: f64,
}

impl FixedThresholdStats {
    /// Mean of the two per-class accuracies.
    pub fn balanced_accuracy(&self) -> f64 {
        1.0 - (self.fpr + self.fnr) / 2.0
    }
}

pub fn at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Result<FixedThresholdStats> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if s >= threshold {
            if l { tp += 1 } else { fp += 1 }
        }
    }
    Ok(FixedThresholdStats {
        threshold,
        accuracy: (tp + n_neg - fp) as f64 / (n_pos + n_neg) as f64,
        fpr: fp as f64 / n_neg as f64,
        fnr: (n_pos - tp) as f64 / n_pos as f64,
    })
}

/// Gaussian kernel density on an even grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    /// Grid abscissa of the highest density value (first one on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.density.iter().enumerate() {
            if v > self.density[best] {
                best = i;
            }
        }
        self.grid[best]
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `1.06 * min(std, IQR/1.34) * n^(-1/5)`, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(scores: &[f64]) -> Result<f64> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::TooFewScores { required: 2, found: n });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = var.sqrt().min(iqr / 1.34);
    Ok((1.06 * spread * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH))
}

pub fn kde(scores: &[f64], bandwidth: Option<f64>) -> Result<DensityEstimate> {
    if scores.len() < 2 {
        return Err(Error::TooFewScores { required: 2, found: scores.len() });
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidParams(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(scores)?,
    };
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| i as f64 / (KDE_GRID_POINTS - 1) as f64).collect();
    let norm = 1.0 / (scores.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&x| {
            norm * scores
                .iter()
                .map(|&s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityEstimate { bandwidth: h, grid, density })
}

/// Per-class densities on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDensities {
    pub high: DensityEstimate,
    pub low: DensityEstimate,
}

impl ClassDensities {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        writeln!(buf, "x,density_high,density_low").map_err(|e| Error::io(path, e))?;
        for ((x, h), l) in self.high.grid.iter().zip(&self.high.density).zip(&self.low.density) {
            writeln!(buf, "{x},{h},{l}").map_err(|e| Error::io(path, e))?;
        }
        crate::output::write_atomic(path, &buf)
    }
}

pub fn class_densities(scores: &[f64], labels: &[bool]) -> Result<ClassDensities> {
    let split = |want: bool| -> Vec<f64> {
        scores.iter().zip(labels).filter(|(_, &l)| l == want).map(|(&s, _)| s).collect()
    };
    Ok(ClassDensities { high: kde(&split(true), None)?, low: kde(&split(false), None)? })
}

/// Everything reported for one module subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subset: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub eer: f64,
    pub acc_at_eer: f64,
    pub tau_eer: f64,
    pub max_acc: f64,
    #[serde(with = "extended_float")]
    pub tau_maxacc: f64,
    /// Accuracy at the threshold the training folds calibrated to, 0.5.
    pub fixed: FixedThresholdStats,
    pub auc: f64,
    pub roc: RocCurve,
    pub densities: ClassDensities,
}

pub fn evaluate(subset: &str, scores: &[f64], labels: &[bool]) -> Result<EvalReport> {
    let curve = roc(scores, labels)?;
    let (e, tau_eer) = eer(&curve);
    let (max_acc, tau_maxacc) = max_accuracy_on(&curve);
    Ok(EvalReport {
        subset: subset.to_string(),
        n_pos: curve.n_pos,
        n_neg: curve.n_neg,
        eer: e,
        acc_at_eer: 1.0 - e,
        tau_eer,
        max_acc,
        tau_maxacc,
        fixed: at_threshold(scores, labels, 0.5)?,
        auc: curve.auc(),
        densities: class_densities(scores, labels)?,
        roc: curve,
    })
}
