//! L2-regularized linear SVM, feature standardization, score calibration and
//! user-grouped selection of the regularization constant.

mod calibrator;
mod scaler;
mod solver;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ModuleId;
use crate::linalg::{axpy, dot, FeatureMatrix};

pub use calibrator::{fit_calibrator, fit_calibrator_balanced, log_loss, Calibrator, MIN_SLOPE};
pub use scaler::Scaler;
pub use solver::{solve_gram, GramSolution};

/// Regularization grid spanning `1e-4 ..= 1e2`.
pub const DEFAULT_C_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `max(0, 1 - y f(x))^2`, unregularized bias.
    #[default]
    SquaredHinge,
    /// `max(0, 1 - y f(x))`; the bias is regularized like a weight.
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Active-set Newton in kernel space (see [`solve_gram`]).
    #[default]
    Newton,
    /// Primal gradient descent with backtracking; squared hinge only.
    GradientDescent,
}

/// Per-class scaling of C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    /// Every sample costs C.
    #[default]
    None,
    /// Sample `i` costs `C * n / (2 n_{class(i)})`, so both classes carry
    /// the same total cost. Cross-validation additionally trains on
    /// [`balanced_subset`]s, since in high dimensions the intercept follows
    /// the majority class whatever the costs.
    Balanced,
}

impl std::str::FromStr for ClassWeight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ClassWeight::None),
            "balanced" => Ok(ClassWeight::Balanced),
            _ => Err(Error::InvalidParams(format!("unknown class weighting '{s}' (expected none or balanced)"))),
        }
    }
}

/// Cost of every sample's loss term.
pub fn sample_costs(c: f64, weighting: ClassWeight, y: &[f64]) -> Vec<f64> {
    match weighting {
        ClassWeight::None => vec![c; y.len()],
        ClassWeight::Balanced => {
            let n = y.len() as f64;
            let pos = y.iter().filter(|&&v| v > 0.0).count().max(1) as f64;
            let neg = (y.len() - y.iter().filter(|&&v| v > 0.0).count()).max(1) as f64;
            y.iter().map(|&v| if v > 0.0 { c * n / (2.0 * pos) } else { c * n / (2.0 * neg) }).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub loss: Loss,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub class_weight: ClassWeight,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_iter: 10_000,
            seed: 0,
            loss: Loss::SquaredHinge,
            solver: Solver::Newton,
            class_weight: ClassWeight::None,
        }
    }
}

impl TrainConfig {
    pub fn with_c(self, c: f64) -> Self {
        Self { c, ..self }
    }

    /// Platt fit matching the class weighting.
    pub fn fit_calibrator(&self, decisions: &[f64], positive: &[bool]) -> Result<Calibrator> {
        match self.class_weight {
            ClassWeight::None => fit_calibrator(decisions, positive),
            ClassWeight::Balanced => fit_calibrator_balanced(decisions, positive),
        }
    }

    pub fn costs(&self, y: &[f64]) -> Vec<f64> {
        sample_costs(self.c, self.class_weight, y)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParams("tol and max_iter must be positive".into()));
        }
        if !(1e-4..=1e2).contains(&self.c) {
            log::warn!("C = {} is outside the usual [1e-4, 1e2] sweep", self.c);
        }
        if self.loss == Loss::Hinge && self.solver == Solver::GradientDescent {
            return Err(Error::InvalidParams("gradient descent supports the squared hinge loss only".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective_value: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub c: f64,
    pub loss: Loss,
}

/// Training objective at `(w, b)`.
pub fn objective(loss: Loss, c: f64, x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64) -> f64 {
    objective_with_costs(loss, &vec![c; y.len()], x, y, w, b)
}

/// Training objective with a separate cost per sample.
pub fn objective_with_costs(loss: Loss, costs: &[f64], x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64) -> f64 {
    let reg = 0.5 * dot(w, w);
    let mut data = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let r = (1.0 - yi * (dot(x.row(i), w) + b)).max(0.0);
        data += costs[i]
            * match loss {
                Loss::SquaredHinge => r * r,
                Loss::Hinge => r,
            };
    }
    match loss {
        Loss::SquaredHinge => reg + data,
        Loss::Hinge => reg + 0.5 * b * b + data,
    }
}

/// Gradient of the squared-hinge objective with respect to `(w, b)`.
pub fn objective_gradient(c: f64, x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64) -> (Vec<f64>, f64) {
    objective_gradient_with_costs(&vec![c; y.len()], x, y, w, b)
}

pub fn objective_gradient_with_costs(costs: &[f64], x: &FeatureMatrix, y: &[f64], w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let r = 1.0 - yi * (dot(row, w) + b);
        if r > 0.0 {
            let k = -2.0 * costs[i] * yi * r;
            axpy(k, row, &mut gw);
            gb += k;
        }
    }
    (gw, gb)
}

/// Validates `+1/-1` targets against a row count.
pub(crate) fn check_targets(rows: usize, y: &[f64]) -> Result<()> {
    if y.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: y.len() });
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput(format!("targets must be +1 or -1, got {v}")));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains on (already standardized) rows `x` with targets in `{-1, +1}`.
pub fn train_svm(x: &FeatureMatrix, y: &[f64], config: &TrainConfig) -> Result<SvmModel> {
    config.validate()?;
    check_targets(x.rows(), y)?;
    let (weights, bias, n_iterations, converged) = match config.solver {
        Solver::Newton => {
            let sol = solve_gram(&x.gram(), y, config, None)?;
            let w = x.t_matvec(&sol.beta);
            (w, sol.bias, sol.iterations, sol.converged)
        }
        Solver::GradientDescent => solver::gradient_descent(x, y, config),
    };
    if weights.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
        return Err(Error::Numerical("non-finite SVM parameters".into()));
    }
    let objective_value = objective_with_costs(config.loss, &config.costs(y), x, y, &weights, bias);
    Ok(SvmModel {
        weights,
        bias,
        objective_value,
        n_iterations,
        converged,
        c: config.c,
        loss: config.loss,
    })
}

pub fn decision(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.weights.len() {
        return Err(Error::DimensionMismatch { expected: model.weights.len(), found: x.len() });
    }
    Ok(dot(&model.weights, x) + model.bias)
}

/// Keeps every row of the smaller class and an evenly spaced, equally
/// large subset of the larger class, in the original order.
pub fn balanced_subset(rows: &[usize], positive: impl Fn(usize) -> bool) -> Vec<usize> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| positive(i));
    let (minor, major) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    if minor.is_empty() {
        return rows.to_vec();
    }
    let step = major.len() as f64 / minor.len() as f64;
    let mut out: Vec<usize> = (0..minor.len()).map(|k| major[(k as f64 * step) as usize]).chain(minor).collect();
    out.sort_unstable();
    out
}

/// Result of the inner cross-validation over the C grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSelection {
    pub c: f64,
    /// `(C, mean inner-validation accuracy)` for every grid value that could
    /// be evaluated.
    pub scores: Vec<(f64, f64)>,
    /// Out-of-fold decision value of every row at the selected C (`None`
    /// for rows whose inner fold could not be trained).
    pub decisions: Vec<Option<f64>>,
}

/// Picks C by user-grouped inner cross-validation on a precomputed Gram
/// matrix. `groups[i]` identifies the user of row `i`; users are dealt
/// round-robin (in sorted order) into `inner_folds` folds. Accuracy is
/// measured at calibrated probability 0.5; ties go to the smaller C. The
/// folds run even for a one-element grid, since their out-of-fold decisions
/// are what the final calibrator is fitted on.
pub fn select_c_gram<G: Ord + Clone>(
    gram: &FeatureMatrix,
    y: &[f64],
    groups: &[G],
    grid: &[f64],
    inner_folds: usize,
    config: &TrainConfig,
) -> Result<CSelection> {
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::EmptyInput("C grid"));
    }
    let users: Vec<G> = {
        let mut u: Vec<G> = groups.to_vec();
        u.sort();
        u.dedup();
        u
    };
    if users.len() < 2 {
        return Err(Error::TooFewUsers(users.len()));
    }
    let k = inner_folds.clamp(2, users.len());
    let fold_of: BTreeMap<&G, usize> = users.iter().enumerate().map(|(i, u)| (u, i % k)).collect();

    let mut sum = vec![0.0; grid.len()];
    let mut count = vec![0usize; grid.len()];
    let mut oof = vec![vec![None; y.len()]; grid.len()];
    for f in 0..k {
        let (tr, va): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold_of[&groups[i]] != f);
        let tr = match config.class_weight {
            ClassWeight::Balanced => balanced_subset(&tr, |i| y[i] > 0.0),
            ClassWeight::None => tr,
        };
        let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        if check_targets(tr.len(), &ytr).is_err() || va.is_empty() {
            continue;
        }
        let ktr = gram.select(&tr, &tr);
        let kva = gram.select(&va, &tr);
        let pos_tr: Vec<bool> = ytr.iter().map(|&v| v > 0.0).collect();
        let mut warm: Option<GramSolution> = None;
        for (gi, &c) in grid.iter().enumerate() {
            let sol = solve_gram(&ktr, &ytr, &config.with_c(c), warm.as_ref())?;
            let cal = config.fit_calibrator(&sol.decisions(&ktr), &pos_tr)?;
            let dva = sol.decisions(&kva);
            let hits = dva
                .iter()
                .zip(&va)
                .filter(|(d, &i)| (cal.calibrate(**d) >= 0.5) == (y[i] > 0.0))
                .count();
            for (d, &i) in dva.iter().zip(&va) {
                oof[gi][i] = Some(*d);
            }
            sum[gi] += hits as f64 / va.len() as f64;
            count[gi] += 1;
            warm = Some(sol);
        }
    }
    let scores: Vec<(f64, f64)> = grid
        .iter()
        .zip(sum.iter().zip(&count))
        .filter(|(_, (_, &n))| n > 0)
        .map(|(&c, (&s, &n))| (c, s / n as f64))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &(c, acc) in &scores {
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((c, acc));
        }
    }
    let (c, _) = best.ok_or(Error::SingleClass)?;
    let gi = grid.iter().position(|&g| g == c).expect("selected C is on the grid");
    Ok(CSelection { c, scores, decisions: std::mem::take(&mut oof[gi]) })
}

/// [`select_c_gram`] on raw (standardized) rows.
pub fn select_c(
    x: &FeatureMatrix,
    y: &[f64],
    user_ids: &[String],
    grid: &[f64],
    inner_folds: usize,
    config: &TrainConfig,
) -> Result<f64> {
    check_targets(x.rows(), y)?;
    if user_ids.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: user_ids.len() });
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    Ok(select_c_gram(&x.gram(), y, user_ids, grid, inner_folds, config)?.c)
}

/// Everything needed to score one modality: scaler, SVM and calibrator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModule {
    pub module: ModuleId,
    pub scaler: Scaler,
    pub model: SvmModel,
    pub calibrator: Calibrator,
    pub tol: f64,
}

impl TrainedModule {
    /// Raw decision value of an unstandardized window vector.
    pub fn decision(&self, raw: &[f64]) -> Result<f64> {
        let z = self.scaler.transform_row(raw)?;
        decision(&self.model, &z)
    }

    pub fn score(&self, raw: &[f64]) -> Result<f64> {
        Ok(self.calibrator.calibrate(self.decision(raw)?))
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            module: self.module,
            dim: self.model.weights.len(),
            weights: self.model.weights.clone(),
            bias: self.model.bias,
            c: self.model.c,
            tol: self.tol,
            scaler_mean: self.scaler.mean.clone(),
            scaler_std: self.scaler.std.clone(),
            calibrator_a: self.calibrator.a,
            calibrator_b: self.calibrator.b,
            converged: self.model.converged,
        }
    }
}

/// JSON form of a [`TrainedModule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub module: ModuleId,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub scaler_mean: Vec<f64>,
    pub scaler_std: Vec<f64>,
    pub calibrator_a: f64,
    pub calibrator_b: f64,
    pub converged: bool,
}

impl ModelFile {
    pub fn score(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: raw.len() });
        }
        let mut d = self.bias;
        for (((v, m), s), w) in raw.iter().zip(&self.scaler_mean).zip(&self.scaler_std).zip(&self.weights) {
            d += w * (v - m) / s;
        }
        Ok(Calibrator { a: self.calibrator_a, b: self.calibrator_b }.calibrate(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<f64> = rows.iter().map(|r| if r[0] + 0.3 * rng.random_range(-1.0..1.0) > 0.0 { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_one_dimensional_pair() {
        let x = FeatureMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let m = train_svm(&x, &[-1.0, 1.0], &TrainConfig::default().with_c(100.0)).unwrap();
        assert!(decision(&m, &[1.0]).unwrap() > 0.0);
        assert!(decision(&m, &[-1.0]).unwrap() < 0.0);
        assert!(m.converged);
    }

    #[test]
    fn xor_set_beats_majority_bound() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let y = [1.0, 1.0, -1.0, -1.0];
        let m = train_svm(&x, &y, &TrainConfig::default()).unwrap();
        let acc = (0..4).filter(|&i| (decision(&m, x.row(i)).unwrap() >= 0.0) == (y[i] > 0.0)).count();
        assert!(acc as f64 / 4.0 >= 0.5);
    }

    #[test]
    fn decision_identities() {
        let m = SvmModel { weights: vec![0.5, -2.0], bias: 0.7, objective_value: 0.0, n_iterations: 0, converged: true, c: 1.0, loss: Loss::SquaredHinge };
        assert_eq!(decision(&m, &[0.0, 0.0]).unwrap(), 0.7);
        let (a, b) = ([1.0, 2.0], [-3.0, 0.25]);
        let sum = [a[0] + b[0], a[1] + b[1]];
        let lhs = decision(&m, &sum).unwrap() + m.bias;
        let rhs = decision(&m, &a).unwrap() + decision(&m, &b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let zero = SvmModel { weights: vec![0.0, 0.0], ..m.clone() };
        assert_eq!(decision(&zero, &[5.0, -9.0]).unwrap(), 0.7);
        assert!(matches!(decision(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_class_and_dimension_errors() {
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(train_svm(&x, &[1.0, 1.0], &TrainConfig::default()), Err(Error::SingleClass)));
        assert!(matches!(train_svm(&x, &[1.0], &TrainConfig::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn objective_value_matches_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, y) = random_problem(&mut rng, 30, 4);
        for loss in [Loss::SquaredHinge, Loss::Hinge] {
            let cfg = TrainConfig { loss, ..TrainConfig::default() };
            let m = train_svm(&x, &y, &cfg).unwrap();
            let f = objective(loss, cfg.c, &x, &y, &m.weights, m.bias);
            assert!((f - m.objective_value).abs() <= 1e-9 * f.abs().max(1e-300));
        }
    }

    #[test]
    fn newton_and_gradient_descent_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in [1e-2, 1.0, 10.0] {
            let (x, y) = random_problem(&mut rng, 25, 3);
            let base = TrainConfig { c, tol: 1e-8, ..TrainConfig::default() };
            let nt = train_svm(&x, &y, &base).unwrap();
            let gd_cfg = TrainConfig { solver: Solver::GradientDescent, tol: 1e-6, max_iter: 2_000_000, ..base };
            let gd = train_svm(&x, &y, &gd_cfg).unwrap();
            assert!(nt.converged && gd.converged, "C={c}: newton {} ({} it), gd {} ({} it)", nt.converged, nt.n_iterations, gd.converged, gd.n_iterations);
            let rel = (nt.objective_value - gd.objective_value).abs() / nt.objective_value;
            assert!(rel < 1e-6, "C={c}: {} vs {}", nt.objective_value, gd.objective_value);
        }
    }

    #[test]
    fn newton_gradient_is_below_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (x, y) = random_problem(&mut rng, 40, 6);
        let cfg = TrainConfig { c: 100.0, ..TrainConfig::default() };
        let m = train_svm(&x, &y, &cfg).unwrap();
        let (gw, gb) = objective_gradient(cfg.c, &x, &y, &m.weights, m.bias);
        assert!(crate::linalg::max_abs(&gw).max(gb.abs()) <= cfg.tol);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y) = random_problem(&mut rng, 30, 5);
        for loss in [Loss::SquaredHinge, Loss::Hinge] {
            let cfg = TrainConfig { loss, seed: 3, ..TrainConfig::default() };
            let a = train_svm(&x, &y, &cfg).unwrap();
            let b = train_svm(&x, &y, &cfg).unwrap();
            let bits = |m: &SvmModel| m.weights.iter().map(|v| v.to_bits()).chain([m.bias.to_bits()]).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn hinge_solver_reaches_dual_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = random_problem(&mut rng, 30, 3);
        let cfg = TrainConfig { loss: Loss::Hinge, tol: 1e-6, max_iter: 100_000, ..TrainConfig::default() };
        let m = train_svm(&x, &y, &cfg).unwrap();
        assert!(m.converged);
        // small perturbations never improve a converged convex objective by more than tol-level amounts
        for k in 0..x.cols() {
            for h in [1e-3, -1e-3] {
                let mut w = m.weights.clone();
                w[k] += h;
                let f = objective(Loss::Hinge, cfg.c, &x, &y, &w, m.bias);
                assert!(f >= m.objective_value - 1e-5);
            }
        }
    }

    #[test]
    fn select_c_single_value_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y) = random_problem(&mut rng, 30, 3);
        let users: Vec<String> = (0..30).map(|i| format!("u{}", i % 3)).collect();
        assert_eq!(select_c(&x, &y, &users, &[0.5], 3, &TrainConfig::default()).unwrap(), 0.5);
        // identical grid values collapse and the smaller of equal scores wins
        let sel = select_c_gram(&x.gram(), &y, &users, &[10.0, 10.0 + 1e-12], 3, &TrainConfig::default()).unwrap();
        assert_eq!(sel.scores[0].1, sel.scores[1].1);
        assert_eq!(sel.c, 10.0);
    }

    #[test]
    fn select_c_on_separable_data_reaches_full_accuracy() {
        // class determined by the sign of the first coordinate with a wide margin
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut users = Vec::new();
        for u in 0..4 {
            for k in 0..20 {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                rows.push(vec![s * rng.random_range(1.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                y.push(s);
                users.push(format!("user{u}"));
            }
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let sel = select_c_gram(&x.gram(), &y, &users, &DEFAULT_C_GRID, 3, &TrainConfig::default()).unwrap();
        let best = sel.scores.iter().find(|(c, _)| *c == sel.c).unwrap().1;
        assert_eq!(best, 1.0);
    }

    #[test]
    fn model_file_scores_like_trained_module() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = random_problem(&mut rng, 20, 2);
        let scaler = Scaler::fit(&x).unwrap();
        let z = scaler.transform(&x).unwrap();
        let model = train_svm(&z, &y, &TrainConfig::default()).unwrap();
        let dec: Vec<f64> = (0..20).map(|i| decision(&model, z.row(i)).unwrap()).collect();
        let pos: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
        let tm = TrainedModule { module: ModuleId::Hp, scaler, model, calibrator: fit_calibrator(&dec, &pos).unwrap(), tol: 1e-3 };
        let file: ModelFile = serde_json::from_str(&serde_json::to_string(&tm.to_file()).unwrap()).unwrap();
        for i in 0..20 {
            assert!((file.score(x.row(i)).unwrap() - tm.score(x.row(i)).unwrap()).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (FeatureMatrix, Vec<f64>, f64)> {
            (2usize..12, 1usize..5, any::<u64>(), prop::sample::select(vec![1e-2, 1.0, 10.0])).prop_map(|(n, d, seed, c)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
                let y = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
                (FeatureMatrix::from_rows(&rows).unwrap(), y, c)
            })
        }

        proptest! {
            #[test]
            fn objective_is_midpoint_convex((x, y, c) in instance(), s1 in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(s1);
                let d = x.cols();
                let p: Vec<f64> = (0..=d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let q: Vec<f64> = (0..=d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
                let f = |t: &[f64]| objective(Loss::SquaredHinge, c, &x, &y, &t[..d], t[d]);
                prop_assert!(f(&mid) <= 0.5 * (f(&p) + f(&q)) + 1e-9 * (1.0 + f(&p) + f(&q)));
            }

            #[test]
            fn gradient_matches_central_differences((x, y, c) in instance(), s1 in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(s1);
                let d = x.cols();
                let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let b = rng.random_range(-1.0..1.0);
                let (gw, gb) = objective_gradient(c, &x, &y, &w, b);
                let f = |w: &[f64], b: f64| objective(Loss::SquaredHinge, c, &x, &y, w, b);
                let h = 1e-6;
                let mut fd = Vec::new();
                for k in 0..d {
                    let (mut wp, mut wm) = (w.clone(), w.clone());
                    wp[k] += h;
                    wm[k] -= h;
                    fd.push((f(&wp, b) - f(&wm, b)) / (2.0 * h));
                }
                fd.push((f(&w, b + h) - f(&w, b - h)) / (2.0 * h));
                let an: Vec<f64> = gw.iter().copied().chain([gb]).collect();
                let scale = crate::linalg::max_abs(&an).max(1.0);
                for (a, n) in an.iter().zip(&fd) {
                    prop_assert!((a - n).abs() / scale < 1e-5, "{} vs {}", a, n);
                }
            }
        }
    }
}
