//! Logistic (Platt) calibration of raw decision values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible slope; keeps the map strictly increasing.
pub const MIN_SLOPE: f64 = 1e-9;

/// `p(d) = sigmoid(a * d + b)` with `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub a: f64,
    pub b: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Calibrator {
    /// Calibrated probability, clamped into the open unit interval.
    pub fn calibrate(&self, decision: f64) -> f64 {
        sigmoid(self.a * decision + self.b).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    /// Raw decision value at which the calibrated output equals `p`.
    pub fn decision_at(&self, p: f64) -> f64 {
        ((p / (1.0 - p)).ln() - self.b) / self.a
    }
}

/// Weighted cross-entropy against the targets.
fn loss(a: f64, b: f64, d: &[f64], t: &[f64], w: &[f64]) -> f64 {
    d.iter()
        .zip(t)
        .zip(w)
        .map(|((&di, &ti), &wi)| {
            let z = a * di + b;
            // -t log s(z) - (1-t) log(1-s(z)) = softplus(z) - t z
            wi * (softplus(z) - ti * z)
        })
        .sum()
}

/// Fits the logistic map by Newton's method on the log-loss.
///
/// Targets are Platt's smoothed labels `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`,
/// which keep the slope finite on separable decisions. A fitted slope below
/// [`MIN_SLOPE`] is raised to it and the intercept refitted.
pub fn fit_calibrator(decisions: &[f64], positive: &[bool]) -> Result<Calibrator> {
    fit(decisions, positive, false)
}

/// Like [`fit_calibrator`], but each class carries half of the total weight,
/// so the intercept does not absorb the class prior of the fitting set.
pub fn fit_calibrator_balanced(decisions: &[f64], positive: &[bool]) -> Result<Calibrator> {
    fit(decisions, positive, true)
}

fn fit(decisions: &[f64], positive: &[bool], balanced: bool) -> Result<Calibrator> {
    if decisions.len() != positive.len() {
        return Err(Error::DimensionMismatch { expected: decisions.len(), found: positive.len() });
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let n = positive.len() as f64;
    // balanced fits smooth both classes as if each had n/2 members
    let (s_pos, s_neg) = if balanced { (n / 2.0, n / 2.0) } else { (n_pos as f64, n_neg as f64) };
    let hi = (s_pos + 1.0) / (s_pos + 2.0);
    let lo = 1.0 / (s_neg + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
    let (w_pos, w_neg) = if balanced { (n / (2.0 * n_pos as f64), n / (2.0 * n_neg as f64)) } else { (1.0, 1.0) };
    let w: Vec<f64> = positive.iter().map(|&p| if p { w_pos } else { w_neg }).collect();
    let d = decisions;
    let tol = 1e-6;

    let mut a = 0.0;
    let mut b = ((w_pos * n_pos as f64 + 1.0) / (w_neg * n_neg as f64 + 1.0)).ln();
    let mut f = loss(a, b, d, &t, &w);
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for ((&di, &ti), &wi) in d.iter().zip(&t).zip(&w) {
            let p = sigmoid(a * di + b);
            let r = wi * (p - ti);
            let h = wi * p * (1.0 - p);
            ga += r * di;
            gb += r;
            haa += h * di * di;
            hab += h * di;
            hbb += h;
        }
        if ga.abs().max(gb.abs()) <= tol {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (mut sa, mut sb) = if det > 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let mut accepted = false;
        for _ in 0..60 {
            let fn_ = loss(a + sa, b + sb, d, &t, &w);
            if fn_ <= f + 1e-4 * (ga * sa + gb * sb) {
                a += sa;
                b += sb;
                f = fn_;
                accepted = true;
                break;
            }
            sa *= 0.5;
            sb *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    if !(a >= MIN_SLOPE) || !b.is_finite() {
        // With the slope pinned, the intercept solves a monotone 1-D
        // equation; bisection cannot run away the way Newton can on flat
        // tails.
        a = MIN_SLOPE;
        let grad = |b: f64| -> f64 {
            d.iter().zip(&t).zip(&w).map(|((&di, &ti), &wi)| wi * (sigmoid(a * di + b) - ti)).sum()
        };
        let reach = a * d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (mut lo_b, mut hi_b) = (-50.0 - reach, 50.0 + reach);
        for _ in 0..200 {
            let mid = 0.5 * (lo_b + hi_b);
            if grad(mid) < 0.0 { lo_b = mid } else { hi_b = mid }
        }
        b = 0.5 * (lo_b + hi_b);
    }
    Ok(Calibrator { a, b })
}

/// Mean binary log-loss of probabilities `p` against hard labels.
pub fn log_loss(p: &[f64], positive: &[bool]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(positive)
        .map(|(&pi, &y)| if y { -pi.ln() } else { -(1.0 - pi).ln() })
        .sum();
    s / p.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn separated_decisions_are_oriented() {
        let cal = fit_calibrator(&[-1.0, -1.0, 1.0, 1.0], &[false, false, true, true]).unwrap();
        assert!(cal.a > 0.0);
        assert!(cal.calibrate(1.0) > 0.5);
        assert!(cal.calibrate(-1.0) < 0.5);
    }

    #[test]
    fn symmetric_balanced_decisions_center_at_half() {
        let d = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, -0.3, 0.3];
        let y = [false, false, true, true, true, true, false, false];
        let cal = fit_calibrator(&d, &y).unwrap();
        assert!((cal.calibrate(0.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fitted_map_beats_constant_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 200;
            let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let d: Vec<f64> = y
                .iter()
                .map(|&p| rng.random_range(-1.0..1.0) + if p { 0.3 } else { -0.3 })
                .collect();
            let cal = fit_calibrator(&d, &y).unwrap();
            let p: Vec<f64> = d.iter().map(|&v| cal.calibrate(v)).collect();
            assert!(log_loss(&p, &y) <= std::f64::consts::LN_2);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(fit_calibrator(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn anti_correlated_decisions_still_yield_increasing_map() {
        let cal = fit_calibrator(&[1.0, 2.0, -1.0, -2.0], &[false, false, true, true]).unwrap();
        assert!(cal.a >= MIN_SLOPE);
        assert!(cal.calibrate(1.0) > cal.calibrate(0.0));
    }

    #[test]
    fn balanced_fit_ignores_class_prior() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let d: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<bool> = (0..400).map(|i| i % 4 != 0).collect();
        let plain = fit_calibrator(&d, &y).unwrap();
        let bal = fit_calibrator_balanced(&d, &y).unwrap();
        assert!((plain.calibrate(0.0) - 0.75).abs() < 0.05);
        assert!((bal.calibrate(0.0) - 0.5).abs() < 0.05);
    }

    #[test]
    fn decision_at_inverts_calibration() {
        let cal = Calibrator { a: 2.0, b: -0.4 };
        let d = cal.decision_at(0.5);
        assert!((cal.calibrate(d) - 0.5).abs() < 1e-15);
    }
}
