//! Sliding one-minute windows, pooled percentile thresholds and labels.

use attnfuse::ingest::ModuleId;
use attnfuse::synthgen::{generate_sessions, Preset, SynthParams};
use attnfuse::windowing::{build_dataset, candidate_window_count, pooled_thresholds, ThresholdSource};

fn main() -> attnfuse::Result<()> {
    let sessions = generate_sessions(&SynthParams::preset(Preset::Easy, 5, 300, 7))?;
    let th = pooled_thresholds(&sessions, 60, 10.0, 90.0, ThresholdSource::WindowMeans)?;
    println!("tau_low {:.2}  tau_high {:.2}", th.tau_low, th.tau_high);
    println!("candidates per 300 s session: {}", candidate_window_count(300, 60));

    let ds = build_dataset(&sessions, &th, &[ModuleId::Eb, ModuleId::Hp], 60, 0.8)?;
    println!("{:?}", ds.counts);
    println!("eb window vector: {} values", ds.matrix(ModuleId::Eb)?.cols());
    for s in ds.samples.iter().take(5) {
        println!("{} t={} mean {:.1} -> {:?}", s.user_id, s.end_second, s.mean_attention, s.label);
    }
    Ok(())
}
