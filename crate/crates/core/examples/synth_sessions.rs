//! Generate synthetic sessions and write them as CSV directories.

use attnfuse::ingest::ModuleId;
use attnfuse::synthgen::{count_blinks, generate_sessions, write_sessions, Preset, SynthParams};

fn main() -> attnfuse::Result<()> {
    let params = SynthParams::preset(Preset::Easy, 3, 240, 11);
    for s in generate_sessions(&params)? {
        let eb = s.stream(ModuleId::Eb)?;
        let mean_att = s.attention.iter().sum::<f64>() / s.attention.len() as f64;
        println!("{}: mean attention {mean_att:.1}, {} blinks", s.user_id, count_blinks(&eb.values));
    }

    let dir = std::env::temp_dir().join("attnfuse-synth-example");
    let users = write_sessions(&params, &dir)?;
    println!("wrote {} under {}", users.join(", "), dir.display());
    Ok(())
}
