use attnfuse::ingest::{load_session_dir, ModuleId, DEFAULT_FPS};
use attnfuse::linalg::FeatureMatrix;
use attnfuse::metrics::{eer, roc};
use attnfuse::protocol::{run_experiment, ExperimentConfig};
use attnfuse::synthgen::{generate_sessions, reference_svm_solve, write_sessions, Preset, SynthParams};
use attnfuse::windowing::{build_dataset, pooled_thresholds, read_dataset, write_dataset, LabeledDataset, ThresholdSource};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(preset: Preset, users: usize, seconds: u64, seed: u64, modules: &[ModuleId]) -> LabeledDataset {
    let sessions = generate_sessions(&SynthParams::preset(preset, users, seconds, seed)).unwrap();
    let th = pooled_thresholds(&sessions, 60, 10.0, 90.0, ThresholdSource::WindowMeans).unwrap();
    build_dataset(&sessions, &th, modules, 60, 0.8).unwrap()
}

#[test]
fn files_on_disk_give_the_same_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams::preset(Preset::Medium, 3, 150, 4);
    write_sessions(&params, dir.path()).unwrap();
    let from_disk = load_session_dir(dir.path(), DEFAULT_FPS).unwrap();
    let in_memory = generate_sessions(&params).unwrap();
    assert_eq!(from_disk.len(), in_memory.len());

    let th = pooled_thresholds(&in_memory, 60, 10.0, 90.0, ThresholdSource::WindowMeans).unwrap();
    let a = build_dataset(&in_memory, &th, &ModuleId::ALL, 60, 0.8).unwrap();
    let b = build_dataset(&from_disk, &th, &ModuleId::ALL, 60, 0.8).unwrap();
    assert_eq!(a.samples, b.samples);
    for m in ModuleId::ALL {
        let (x, y) = (a.matrix(m).unwrap(), b.matrix(m).unwrap());
        let worst = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{m}: {worst}");
    }

    let ds_dir = dir.path().join("dataset");
    write_dataset(&a, &ds_dir).unwrap();
    assert_eq!(read_dataset(&ds_dir).unwrap(), a);
}

#[test]
fn calibration_leaves_module_eer_unchanged() {
    let ds = dataset(Preset::Easy, 5, 360, 2, &[ModuleId::Eb, ModuleId::Hp]);
    let res = run_experiment(&ExperimentConfig::default_for(&ds), &ds).unwrap();
    let labels: Vec<bool> = ds.samples.iter().map(|s| s.label.is_high()).collect();
    for m in [ModuleId::Eb, ModuleId::Hp] {
        for fold in &res.folds {
            let fit = &fold.modules[&m];
            let lab: Vec<bool> = fold.test_idx.iter().map(|&i| labels[i]).collect();
            if lab.iter().all(|&l| l) || lab.iter().all(|&l| !l) {
                continue;
            }
            let raw: Vec<f64> = fold.test_idx.iter().map(|&i| fit.trained.decision(ds.vector(m, i).unwrap()).unwrap()).collect();
            let e_raw = eer(&roc(&raw, &lab).unwrap()).0;
            let e_cal = eer(&roc(&fit.test_scores, &lab).unwrap()).0;
            assert!((e_raw - e_cal).abs() < 1e-12, "{m} {}: {e_raw} vs {e_cal}", fold.test_user);
        }
    }
}

#[test]
fn doubling_c_never_raises_the_hinge_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let n = rng.random_range(6..20);
        let d = rng.random_range(1..4);
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rows: Vec<Vec<f64>> = y.iter().map(|&l| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0 + 0.3 * l).collect()).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let hinge = |c: f64| {
            let s = reference_svm_solve(&x, &y, c).unwrap();
            (0..n)
                .map(|i| {
                    let m = x.row(i).iter().zip(&s.weights).map(|(a, b)| a * b).sum::<f64>() + s.bias;
                    (1.0 - y[i] * m).max(0.0).powi(2)
                })
                .sum::<f64>()
        };
        let mut prev = hinge(0.05);
        for c in [0.1, 0.2, 0.4, 0.8] {
            let h = hinge(c);
            assert!(h <= prev + 1e-9, "C={c}: {h} > {prev}");
            prev = h;
        }
    }
}

#[test]
fn more_blinks_in_low_windows_when_coupled() {
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let ds = dataset(Preset::Easy, 3, 300, seed, &[ModuleId::Eb]);
        for (i, s) in ds.samples.iter().enumerate() {
            let n = attnfuse::synthgen::count_blinks(ds.vector(ModuleId::Eb, i).unwrap()) as f64;
            if s.label.is_high() { high.push(n) } else { low.push(n) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&low) > mean(&high), "low {} high {}", mean(&low), mean(&high));
}
