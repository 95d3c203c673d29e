//! Full leave-one-user-out run on a synthetic preset, repeated over seeds.
//!
//! ```text
//! cargo run --release --example preset_benchmark -- easy 8 900 3
//! ```
//! Arguments: preset, users, duration in seconds, number of seeds.

use std::time::Instant;

use attnfuse::ingest::ModuleId;
use attnfuse::protocol::{run_experiment, ExperimentConfig};
use attnfuse::synthgen::{generate_sessions, Preset, SynthParams};
use attnfuse::windowing::{build_dataset, pooled_thresholds, ThresholdSource};

fn main() -> attnfuse::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let preset: Preset = args.first().map_or("easy", String::as_str).parse()?;
    let users: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(6);
    let duration: u64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(600);
    let seeds: u64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(1);

    for seed in 0..seeds {
        let t0 = Instant::now();
        let params = SynthParams::preset(preset, users, duration, seed);
        let sessions = generate_sessions(&params)?;
        let th = pooled_thresholds(&sessions, 60, 10.0, 90.0, ThresholdSource::WindowMeans)?;
        let ds = build_dataset(&sessions, &th, &ModuleId::ALL, 60, 0.8)?;
        let t1 = Instant::now();
        let res = run_experiment(&ExperimentConfig::default_for(&ds), &ds)?;
        println!(
            "seed {seed}: {} samples ({} high / {} low), data {:.1}s, protocol {:.1}s",
            ds.len(),
            ds.counts.high,
            ds.counts.low,
            (t1 - t0).as_secs_f64(),
            t1.elapsed().as_secs_f64()
        );
        let mut per_user: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
        for s in &ds.samples {
            let e = per_user.entry(s.user_id.as_str()).or_default();
            if s.label.is_high() { e.0 += 1 } else { e.1 += 1 }
        }
        let mix: Vec<String> = per_user.iter().map(|(u, (h, l))| format!("{u}:{h}/{l}")).collect();
        println!("  high/low per user: {}", mix.join(" "));
        for r in &res.reports {
            println!("  {:<16} max_acc {:.4}  1-EER {:.4}  acc@0.5 {:.4}", r.subset, r.max_acc, r.acc_at_eer, r.fixed.accuracy);
        }
        for f in &res.folds {
            let cs: Vec<String> = f.modules.iter().map(|(m, fit)| format!("{m}={}", fit.trained.model.c)).collect();
            println!("  fold {}: {}", f.test_user, cs.join(" "));
        }
    }
    Ok(())
}
