//! Slow, obviously-correct reference implementations.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceEer {
    /// `min_t max(FPR(t), FNR(t))` over all candidate thresholds.
    pub min_max: f64,
    /// Linear interpolation of the first sign change of `FPR - FNR`.
    pub interpolated: f64,
}

fn classes(scores: &[f64], labels: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: labels.len() });
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Every threshold worth trying: below all scores, between each pair of
/// adjacent distinct scores, above all scores.
fn all_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut t = vec![f64::NEG_INFINITY];
    for i in 1..s.len() {
        t.push(s[i - 1] + (s[i] - s[i - 1]) / 2.0);
    }
    t.push(f64::INFINITY);
    t
}

fn rate_at_or_above(values: &[f64], t: f64) -> f64 {
    values.iter().filter(|&&v| v >= t).count() as f64 / values.len() as f64
}

pub fn brute_force_eer(scores: &[f64], labels: &[bool]) -> Result<BruteForceEer> {
    let (pos, neg) = classes(scores, labels)?;
    let pts: Vec<(f64, f64)> = all_thresholds(scores)
        .into_iter()
        .map(|t| (rate_at_or_above(&neg, t), 1.0 - rate_at_or_above(&pos, t)))
        .collect();
    let min_max = pts.iter().map(|(fpr, fnr)| fpr.max(*fnr)).fold(f64::INFINITY, f64::min);
    let mut interpolated = pts[pts.len() - 1].0;
    for k in 0..pts.len() {
        let d = pts[k].0 - pts[k].1;
        if d <= 0.0 {
            interpolated = if d == 0.0 || k == 0 {
                pts[k].0
            } else {
                let dp = pts[k - 1].0 - pts[k - 1].1;
                let f = dp / (dp - d);
                pts[k - 1].0 + f * (pts[k].0 - pts[k - 1].0)
            };
            break;
        }
    }
    Ok(BruteForceEer { min_max, interpolated })
}

/// Exhaustive accuracy sweep; returns the best accuracy and the smallest
/// threshold achieving it.
pub fn brute_force_max_accuracy(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    classes(scores, labels)?;
    let mut best = (-1.0, f64::NAN);
    for t in all_thresholds(scores) {
        let correct = scores.iter().zip(labels).filter(|(&s, &l)| (s >= t) == l).count();
        let acc = correct as f64 / scores.len() as f64;
        if acc > best.0 {
            best = (acc, t);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

fn sq_hinge(c: f64, x: &FeatureMatrix, y: &[f64], p: &[f64]) -> (f64, Vec<f64>) {
    let d = x.cols();
    let (w, b) = (&p[..d], p[d]);
    let mut f = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let mut g: Vec<f64> = w.iter().copied().chain([0.0]).collect();
    for i in 0..x.rows() {
        let row = x.row(i);
        let m = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let r = 1.0 - y[i] * m;
        if r > 0.0 {
            f += c * r * r;
            let k = -2.0 * c * y[i] * r;
            for j in 0..d {
                g[j] += k * row[j];
            }
            g[d] += k;
        }
    }
    (f, g)
}

/// Accelerated gradient descent with adaptive restarts on the squared-hinge
/// objective, from several starting points; keeps the best end point. Each
/// run stops at gradient norm `1e-10` or after a million iterations.
pub fn reference_svm_solve(x: &FeatureMatrix, y: &[f64], c: f64) -> Result<ReferenceSolution> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch { expected: x.rows(), found: y.len() });
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let d = x.cols();
    // Lipschitz bound of the gradient: 1 + 2C * sum_i |(x_i, 1)|^2
    let lip = 1.0 + 2.0 * c * (0..x.rows()).map(|i| 1.0 + x.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
    let step = 1.0 / lip;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..4 {
        let mut p: Vec<f64> = if start == 0 { vec![0.0; d + 1] } else { (0..=d).map(|_| rng.random_range(-3.0..3.0)).collect() };
        let mut prev = p.clone();
        let mut momentum = 1.0f64;
        let mut f_prev = f64::INFINITY;
        for _ in 0..1_000_000 {
            let t_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let beta = (momentum - 1.0) / t_next;
            let z: Vec<f64> = p.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
            let (_, gz) = sq_hinge(c, x, y, &z);
            if gz.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-10 {
                p = z;
                break;
            }
            prev = std::mem::replace(&mut p, z.iter().zip(&gz).map(|(a, g)| a - step * g).collect());
            let (f, g) = sq_hinge(c, x, y, &p);
            if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-10 {
                break;
            }
            if f > f_prev {
                // restart the momentum sequence
                momentum = 1.0;
                prev = p.clone();
            } else {
                momentum = t_next;
            }
            f_prev = f;
        }
        let (f, _) = sq_hinge(c, x, y, &p);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, p));
        }
    }
    let (objective, p) = best.expect("at least one start");
    Ok(ReferenceSolution { weights: p[..d].to_vec(), bias: p[d], objective })
}
