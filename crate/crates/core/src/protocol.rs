//! Leave-one-user-out evaluation.
//!
//! Every fold holds out all windows of one user. Scaler, C selection, SVM and
//! calibrator of each module are fitted on the remaining users only; the
//! held-out windows are scored, and the scores of all folds are pooled before
//! fusion and metric computation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{enumerate_combinations, subset_name, FusionConfig, ScoreSet};
use crate::ingest::ModuleId;
use crate::linalg::{dot, FeatureMatrix};
use crate::metrics::{evaluate, EvalReport};
use crate::output::write_json;
use crate::svm::{
    balanced_subset, check_targets, objective_with_costs, select_c_gram, ClassWeight, solve_gram, Scaler, SvmModel, TrainConfig,
    TrainedModule, DEFAULT_C_GRID,
};
use crate::windowing::{LabeledDataset, Thresholds};

/// Environment variable capping the number of worker threads (0 = auto).
pub const THREADS_ENV: &str = "ATTNFUSE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Operating points chosen on the pooled held-out scores.
    #[default]
    PooledTest,
    /// Fixed threshold 0.5 on scores calibrated on training folds.
    TrainCalibrated,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled_test" | "pooled-test" => Ok(Self::PooledTest),
            "train_calibrated" | "train-calibrated" => Ok(Self::TrainCalibrated),
            other => Err(Error::Usage(format!(
                "unknown threshold mode '{other}' (expected pooled_test or train_calibrated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Module subsets to report; each is fused with `weights`.
    pub subsets: Vec<Vec<ModuleId>>,
    /// Fusion weights; modules not listed get weight 1. Normalized per subset.
    #[serde(default)]
    pub weights: BTreeMap<ModuleId, f64>,
    pub c_grid: Vec<f64>,
    pub inner_folds: usize,
    /// Solver settings; its `c` is ignored in favor of the selected value.
    pub train: TrainConfig,
    pub threshold_mode: ThresholdMode,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Every combination of the dataset's modules, head distance excluded.
    pub fn default_for(dataset: &LabeledDataset) -> Self {
        let mods: Vec<ModuleId> = dataset.modules().into_iter().filter(|&m| m != ModuleId::Hd).collect();
        Self {
            subsets: enumerate_combinations(&mods),
            weights: BTreeMap::new(),
            c_grid: DEFAULT_C_GRID.to_vec(),
            inner_folds: 3,
            train: TrainConfig { class_weight: ClassWeight::Balanced, ..TrainConfig::default() },
            threshold_mode: ThresholdMode::PooledTest,
            seed: 0,
        }
    }

    pub fn modules(&self) -> Vec<ModuleId> {
        let set: BTreeSet<ModuleId> = self.subsets.iter().flatten().copied().collect();
        set.into_iter().collect()
    }

    pub fn fusion_config(&self, subset: &[ModuleId]) -> Result<FusionConfig> {
        FusionConfig::new(subset.iter().map(|m| (*m, self.weights.get(m).copied().unwrap_or(1.0))))
    }

    pub fn validate(&self, dataset: &LabeledDataset) -> Result<()> {
        if self.subsets.is_empty() || self.subsets.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidParams("at least one nonempty module subset is required".into()));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidParams("C grid must be nonempty and positive".into()));
        }
        if self.inner_folds < 2 {
            return Err(Error::InvalidParams("inner_folds must be at least 2".into()));
        }
        self.train.with_c(self.c_grid[0]).validate()?;
        for s in &self.subsets {
            self.fusion_config(s)?;
        }
        let t = &dataset.thresholds;
        if !(t.p_low < t.p_high) {
            return Err(Error::InvalidParams("dataset percentiles must satisfy p_low < p_high".into()));
        }
        for m in self.modules() {
            dataset.matrix(m)?;
        }
        Ok(())
    }
}

/// One leave-one-user-out split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub test_user: String,
    pub train_users: Vec<String>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// One fold per user, ordered by user id.
pub fn loo_split(dataset: &LabeledDataset) -> Result<Vec<Fold>> {
    let users: BTreeSet<&str> = dataset.samples.iter().map(|s| s.user_id.as_str()).collect();
    if users.len() < 2 {
        return Err(Error::TooFewUsers(users.len()));
    }
    Ok(users
        .iter()
        .map(|&u| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| dataset.samples[i].user_id == u);
            Fold {
                test_user: u.to_string(),
                train_users: users.iter().filter(|&&v| v != u).map(|v| v.to_string()).collect(),
                train_idx,
                test_idx,
            }
        })
        .collect())
}

/// Leakage guard: train and test users are disjoint in every fold, indices
/// match the users they claim, and every sample is tested exactly once.
pub fn verify_fold_plan(dataset: &LabeledDataset, folds: &[Fold]) -> Result<()> {
    let leak = |msg: String| Err(Error::Leakage(msg));
    let mut tested = vec![0usize; dataset.len()];
    for f in folds {
        let train: HashSet<&str> = f.train_users.iter().map(String::as_str).collect();
        if train.contains(f.test_user.as_str()) {
            return leak(format!("user {} is both trained on and tested", f.test_user));
        }
        for &i in &f.train_idx {
            let u = dataset.samples.get(i).map(|s| s.user_id.as_str());
            match u {
                Some(u) if train.contains(u) && u != f.test_user => {}
                _ => return leak(format!("fold {}: training row {i} does not belong to a training user", f.test_user)),
            }
        }
        for &i in &f.test_idx {
            match dataset.samples.get(i) {
                Some(s) if s.user_id == f.test_user => tested[i] += 1,
                _ => return leak(format!("fold {}: test row {i} does not belong to the test user", f.test_user)),
            }
        }
    }
    if let Some(i) = tested.iter().position(|&n| n != 1) {
        return leak(format!("sample {i} is tested {} times", tested[i]));
    }
    Ok(())
}

/// Out-of-fold state of one module in one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleFit {
    pub trained: TrainedModule,
    /// `(C, inner accuracy)` pairs considered during selection.
    pub c_scores: Vec<(f64, f64)>,
    /// Calibrated scores of the fold's test rows, in `test_idx` order.
    pub test_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub test_user: String,
    pub train_users: Vec<String>,
    pub n_train: usize,
    pub test_idx: Vec<usize>,
    pub modules: BTreeMap<ModuleId, ModuleFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedFold {
    pub user_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub folds: Vec<FoldResult>,
    pub failed: Vec<FailedFold>,
    /// Pooled held-out scores in dataset order (failed folds omitted).
    pub scores: ScoreSet,
    pub reports: Vec<EvalReport>,
}

/// Fits scaler, C, SVM and calibrator of one module on `train_idx`. Also
/// returns the inner-validation accuracy of every C on the grid.
pub fn train_module(
    dataset: &LabeledDataset,
    module: ModuleId,
    train_idx: &[usize],
    config: &ExperimentConfig,
) -> Result<(TrainedModule, Vec<(f64, f64)>)> {
    let x = dataset.matrix(module)?;
    let targets = dataset.targets();
    let balanced_idx;
    let train_idx = if config.train.class_weight == ClassWeight::Balanced {
        balanced_idx = balanced_subset(train_idx, |i| targets[i] > 0.0);
        &balanced_idx[..]
    } else {
        train_idx
    };
    let y: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
    check_targets(train_idx.len(), &y)?;
    let groups: Vec<&str> = train_idx.iter().map(|&i| dataset.samples[i].user_id.as_str()).collect();

    let scaler = Scaler::fit_rows(x, train_idx)?;
    let xs = scaler.transform_rows(x, train_idx)?;
    let gram = xs.gram();
    let sel = select_c_gram(&gram, &y, &groups, &config.c_grid, config.inner_folds, &config.train)?;
    let cfg = config.train.with_c(sel.c);
    cfg.validate()?;
    let sol = solve_gram(&gram, &y, &cfg, None)?;
    let weights = xs.t_matvec(&sol.beta);
    if weights.iter().any(|v| !v.is_finite()) || !sol.bias.is_finite() {
        return Err(Error::Numerical(format!("non-finite {module} model")));
    }
    if !sol.converged {
        log::warn!("{module}: solver stopped after {} iterations without converging", sol.iterations);
    }

    // Platt calibration on out-of-fold decisions when the inner folds cover
    // both classes, on the training decisions otherwise.
    let (dec, pos): (Vec<f64>, Vec<bool>) = sel
        .decisions
        .iter()
        .zip(&y)
        .filter_map(|(d, &t)| d.map(|d| (d, t > 0.0)))
        .unzip();
    let calibrator = match cfg.fit_calibrator(&dec, &pos) {
        Ok(c) => c,
        Err(_) => {
            let pos: Vec<bool> = y.iter().map(|&t| t > 0.0).collect();
            cfg.fit_calibrator(&sol.decisions(&gram), &pos)?
        }
    };
    let model = SvmModel {
        objective_value: objective_with_costs(cfg.loss, &cfg.costs(&y), &xs, &y, &weights, sol.bias),
        weights,
        bias: sol.bias,
        n_iterations: sol.iterations,
        converged: sol.converged,
        c: sel.c,
        loss: cfg.loss,
    };
    Ok((TrainedModule { module, scaler, model, calibrator, tol: cfg.tol }, sel.scores))
}

fn score_rows(trained: &TrainedModule, x: &FeatureMatrix, rows: &[usize]) -> Vec<f64> {
    let mut z = vec![0.0; x.cols()];
    rows.iter()
        .map(|&i| {
            trained.scaler.transform_into(x.row(i), &mut z);
            trained.calibrator.calibrate(dot(&trained.model.weights, &z) + trained.model.bias)
        })
        .collect()
}

fn run_fold(dataset: &LabeledDataset, fold: &Fold, config: &ExperimentConfig) -> Result<FoldResult> {
    let mut modules = BTreeMap::new();
    for m in config.modules() {
        let (trained, c_scores) = train_module(dataset, m, &fold.train_idx, config)?;
        let test_scores = score_rows(&trained, dataset.matrix(m)?, &fold.test_idx);
        if test_scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite {m} score for user {}", fold.test_user)));
        }
        modules.insert(m, ModuleFit { trained, c_scores, test_scores });
    }
    Ok(FoldResult {
        test_user: fold.test_user.clone(),
        train_users: fold.train_users.clone(),
        n_train: fold.train_idx.len(),
        test_idx: fold.test_idx.clone(),
        modules,
    })
}

/// Worker count: `ATTNFUSE_THREADS` if set and positive, otherwise the
/// available parallelism; never more than `jobs`.
pub fn worker_count(jobs: usize) -> usize {
    let env = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    let n = if env > 0 { env } else { std::thread::available_parallelism().map_or(1, |n| n.get()) };
    n.clamp(1, jobs.max(1))
}

pub fn run_experiment(config: &ExperimentConfig, dataset: &LabeledDataset) -> Result<ExperimentResult> {
    let folds = loo_split(dataset)?;
    run_with_plan(config, dataset, &folds)
}

/// [`run_experiment`] on an explicit fold plan, which is checked first.
pub fn run_with_plan(config: &ExperimentConfig, dataset: &LabeledDataset, folds: &[Fold]) -> Result<ExperimentResult> {
    config.validate(dataset)?;
    if dataset.is_empty() {
        return Err(Error::NoLabeledSamples);
    }
    check_targets(dataset.len(), &dataset.targets())?;
    verify_fold_plan(dataset, folds)?;

    let slots: Vec<Mutex<Option<Result<FoldResult>>>> = folds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = worker_count(folds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(fold) = folds.get(k) else { break };
                log::info!("fold {}/{}: holding out {}", k + 1, folds.len(), fold.test_user);
                let r = run_fold(dataset, fold, config);
                *slots[k].lock().expect("fold slot") = Some(r);
            });
        }
    });

    let mut done = Vec::new();
    let mut failed = Vec::new();
    for (fold, slot) in folds.iter().zip(slots) {
        match slot.into_inner().expect("fold slot").expect("every fold runs") {
            Ok(r) => done.push(r),
            Err(e) => {
                log::warn!("fold {} excluded: {e}", fold.test_user);
                failed.push(FailedFold { user_id: fold.test_user.clone(), reason: e.to_string() });
            }
        }
    }
    if done.is_empty() {
        return Err(Error::InvalidInput("every fold failed to train".into()));
    }

    let scores = pool_scores(dataset, &done, &config.modules());
    let mut reports = Vec::with_capacity(config.subsets.len());
    for subset in &config.subsets {
        let fused = scores.fuse_all(&config.fusion_config(subset)?)?;
        reports.push(evaluate(&subset_name(subset), &fused, &scores.labels)?);
    }
    Ok(ExperimentResult { config: config.clone(), folds: done, failed, scores, reports })
}

/// Held-out scores of all folds, in dataset order.
fn pool_scores(dataset: &LabeledDataset, folds: &[FoldResult], modules: &[ModuleId]) -> ScoreSet {
    let mut per_sample: BTreeMap<usize, BTreeMap<ModuleId, f64>> = BTreeMap::new();
    for f in folds {
        for (m, fit) in &f.modules {
            for (&i, &s) in f.test_idx.iter().zip(&fit.test_scores) {
                per_sample.entry(i).or_default().insert(*m, s);
            }
        }
    }
    let mut set = ScoreSet::default();
    for m in modules {
        set.scores.insert(*m, Vec::with_capacity(per_sample.len()));
    }
    for (i, scores) in per_sample {
        let s = &dataset.samples[i];
        set.user_ids.push(s.user_id.clone());
        set.end_seconds.push(s.end_second as u32);
        set.labels.push(s.label.is_high());
        for (m, v) in scores {
            set.scores.get_mut(&m).expect("module column").push(v);
        }
    }
    set
}

/// Summary of a dataset as recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_high: usize,
    pub n_low: usize,
    pub users: Vec<String>,
    pub thresholds: Thresholds,
    pub window_seconds: u64,
    pub fps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleFoldSummary {
    #[serde(rename = "C")]
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub calibrator_a: f64,
    pub calibrator_b: f64,
    pub c_scores: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub user_id: String,
    pub n_train: usize,
    pub n_test: usize,
    pub modules: BTreeMap<ModuleId, ModuleFoldSummary>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub threshold_mode: ThresholdMode,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub folds: Vec<FoldSummary>,
    pub failed_folds: Vec<FailedFold>,
    pub subsets: Vec<EvalReport>,
}

pub const REPORT_FORMAT: &str = "attnfuse-report-v1";

impl ExperimentResult {
    pub fn report(&self, dataset: &LabeledDataset) -> Report {
        let c = &dataset.counts;
        Report {
            format: REPORT_FORMAT.into(),
            threshold_mode: self.config.threshold_mode,
            config: self.config.clone(),
            dataset: DatasetSummary {
                n_samples: dataset.len(),
                n_high: c.high,
                n_low: c.low,
                users: dataset.users.clone(),
                thresholds: dataset.thresholds,
                window_seconds: dataset.window_seconds,
                fps: dataset.fps,
            },
            folds: self
                .folds
                .iter()
                .map(|f| FoldSummary {
                    user_id: f.test_user.clone(),
                    n_train: f.n_train,
                    n_test: f.test_idx.len(),
                    modules: f
                        .modules
                        .iter()
                        .map(|(m, fit)| {
                            let t = &fit.trained;
                            (
                                *m,
                                ModuleFoldSummary {
                                    c: t.model.c,
                                    converged: t.model.converged,
                                    iterations: t.model.n_iterations,
                                    objective: t.model.objective_value,
                                    calibrator_a: t.calibrator.a,
                                    calibrator_b: t.calibrator.b,
                                    c_scores: fit.c_scores.clone(),
                                },
                            )
                        })
                        .collect(),
                })
                .collect(),
            failed_folds: self.failed.clone(),
            subsets: self.reports.clone(),
        }
    }

    /// Writes `report.json`, `roc_<subset>.csv`, `pdf_<subset>.csv` and
    /// `folds/<user_id>/model_<module>.json` under `dir`.
    pub fn write(&self, dataset: &LabeledDataset, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = vec!["report.json".to_string()];
        write_json(&dir.join("report.json"), &self.report(dataset))?;
        for r in &self.reports {
            let roc = format!("roc_{}.csv", r.subset);
            let pdf = format!("pdf_{}.csv", r.subset);
            r.roc.write_csv(&dir.join(&roc))?;
            r.densities.write_csv(&dir.join(&pdf))?;
            written.extend([roc, pdf]);
        }
        for f in &self.folds {
            let fd = dir.join("folds").join(&f.test_user);
            std::fs::create_dir_all(&fd).map_err(|e| Error::io(&fd, e))?;
            for (m, fit) in &f.modules {
                let name = format!("model_{m}.json");
                write_json(&fd.join(&name), &fit.trained.to_file())?;
                written.push(format!("folds/{}/{name}", f.test_user));
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::{Label, LabelCounts, WindowSample};

    /// Two-feature dataset: `eb` separates the classes, `hp` is noise.
    fn toy(users: usize, per_user: usize, seed: u64) -> LabeledDataset {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        let (mut eb, mut hp) = (Vec::new(), Vec::new());
        for u in 0..users {
            for k in 0..per_user {
                let high = k % 2 == 0;
                let s = if high { 1.0 } else { -1.0 };
                eb.push(vec![s + 0.3 * rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                hp.push(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                samples.push(WindowSample {
                    user_id: format!("u{u}"),
                    end_second: 60 + k as u64,
                    mean_attention: if high { 90.0 } else { 10.0 },
                    label: if high { Label::High } else { Label::Low },
                    valid_fraction: 1.0,
                });
            }
        }
        let n = samples.len();
        let matrices = [
            (ModuleId::Eb, FeatureMatrix::from_rows(&eb).unwrap()),
            (ModuleId::Hp, FeatureMatrix::from_rows(&hp).unwrap()),
        ]
        .into_iter()
        .collect();
        LabeledDataset {
            users: (0..users).map(|u| format!("u{u}")).collect(),
            samples,
            thresholds: Thresholds { tau_low: 20.0, tau_high: 80.0, p_low: 10.0, p_high: 90.0 },
            window_seconds: 60,
            fps: 1,
            min_valid_fraction: 0.8,
            counts: LabelCounts { candidates: n, high: n / 2, low: n - n / 2, excluded: 0, dropped_invalid: 0 },
            matrices,
        }
    }

    #[test]
    fn loo_split_examples() {
        let ds = toy(3, 4, 0);
        let folds = loo_split(&ds).unwrap();
        assert_eq!(folds.len(), 3);
        assert_eq!(folds[1].test_user, "u1");
        assert_eq!(folds[1].train_users, vec!["u0", "u2"]);
        verify_fold_plan(&ds, &folds).unwrap();
        assert!(matches!(loo_split(&toy(1, 4, 0)), Err(Error::TooFewUsers(1))));
    }

    #[test]
    fn leaky_plans_are_caught() {
        let ds = toy(3, 4, 0);
        let mut folds = loo_split(&ds).unwrap();
        let i = folds[0].test_idx[0];
        folds[0].train_idx.push(i);
        assert!(matches!(verify_fold_plan(&ds, &folds), Err(Error::Leakage(_))));
        let mut folds = loo_split(&ds).unwrap();
        let u = folds[2].test_user.clone();
        folds[2].train_users.push(u);
        assert!(matches!(verify_fold_plan(&ds, &folds), Err(Error::Leakage(_))));
        let mut folds = loo_split(&ds).unwrap();
        folds.pop();
        assert!(matches!(verify_fold_plan(&ds, &folds), Err(Error::Leakage(_))));
        let cfg = ExperimentConfig::default_for(&ds);
        let mut folds = loo_split(&ds).unwrap();
        let i = folds[0].test_idx[0];
        folds[1].test_idx.push(i);
        assert!(matches!(run_with_plan(&cfg, &ds, &folds), Err(Error::Leakage(_))));
    }

    #[test]
    fn informative_module_is_found_and_noise_is_not() {
        let ds = toy(4, 30, 1);
        let cfg = ExperimentConfig { subsets: vec![vec![ModuleId::Eb], vec![ModuleId::Hp], vec![ModuleId::Eb, ModuleId::Hp]], ..ExperimentConfig::default_for(&ds) };
        let res = run_experiment(&cfg, &ds).unwrap();
        assert!(res.failed.is_empty());
        assert_eq!(res.scores.len(), ds.len());
        let by: BTreeMap<&str, &EvalReport> = res.reports.iter().map(|r| (r.subset.as_str(), r)).collect();
        assert!(by["eb"].eer <= 0.02);
        assert!((0.3..=0.7).contains(&by["hp"].eer));
    }

    #[test]
    fn runs_are_deterministic_across_thread_counts() {
        let ds = toy(3, 16, 2);
        let cfg = ExperimentConfig::default_for(&ds);
        let a = run_experiment(&cfg, &ds).unwrap();
        let b = run_experiment(&cfg, &ds).unwrap();
        let ja = serde_json::to_string(&a.report(&ds)).unwrap();
        let jb = serde_json::to_string(&b.report(&ds)).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn singleton_fusion_reproduces_module_scores() {
        let ds = toy(3, 16, 3);
        let cfg = ExperimentConfig::default_for(&ds);
        let res = run_experiment(&cfg, &ds).unwrap();
        let fused = res.scores.fuse_all(&cfg.fusion_config(&[ModuleId::Eb]).unwrap()).unwrap();
        assert_eq!(fused, res.scores.scores[&ModuleId::Eb]);
    }

    #[test]
    fn degenerate_fold_is_excluded_with_warning() {
        let ds = toy(3, 10, 4);
        let mut folds = loo_split(&ds).unwrap();
        // the fold holding out u1 only sees High training rows
        folds[1].train_idx.retain(|&i| ds.samples[i].label == Label::High);
        let cfg = ExperimentConfig { subsets: vec![vec![ModuleId::Eb]], ..ExperimentConfig::default_for(&ds) };
        let res = run_with_plan(&cfg, &ds, &folds).unwrap();
        assert_eq!(res.failed.len(), 1);
        assert_eq!(res.failed[0].user_id, "u1");
        assert!(res.scores.user_ids.iter().all(|u| u != "u1"));
        assert_eq!(res.scores.len(), 20);
    }

    #[test]
    fn results_directory_layout() {
        let ds = toy(3, 10, 5);
        let cfg = ExperimentConfig { subsets: vec![vec![ModuleId::Eb], vec![ModuleId::Eb, ModuleId::Hp]], ..ExperimentConfig::default_for(&ds) };
        let res = run_experiment(&cfg, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        res.write(&ds, dir.path()).unwrap();
        for f in ["report.json", "roc_eb.csv", "pdf_eb+hp.csv", "folds/u2/model_hp.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let back: Report = crate::output::read_json(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, res.report(&ds));
    }
}
