//! Leave-one-user-out evaluation on a small synthetic dataset.

use attnfuse::ingest::ModuleId;
use attnfuse::protocol::{loo_split, run_experiment, ExperimentConfig};
use attnfuse::synthgen::{generate_sessions, Preset, SynthParams};
use attnfuse::windowing::{build_dataset, pooled_thresholds, ThresholdSource};

fn main() -> attnfuse::Result<()> {
    let sessions = generate_sessions(&SynthParams::preset(Preset::Easy, 6, 400, 0))?;
    let th = pooled_thresholds(&sessions, 60, 10.0, 90.0, ThresholdSource::WindowMeans)?;
    let ds = build_dataset(&sessions, &th, &[ModuleId::Eb, ModuleId::Hp, ModuleId::Expr], 60, 0.8)?;

    for f in loo_split(&ds)? {
        println!("test {}: {} test / {} train windows", f.test_user, f.test_idx.len(), f.train_idx.len());
    }

    let res = run_experiment(&ExperimentConfig::default_for(&ds), &ds)?;
    for r in &res.reports {
        println!("{:<12} max_acc {:.4}  1-EER {:.4}", r.subset, r.max_acc, r.acc_at_eer);
    }
    let out = std::env::temp_dir().join("attnfuse-loo-example");
    res.write(&ds, &out)?;
    println!("results written to {}", out.display());
    Ok(())
}
