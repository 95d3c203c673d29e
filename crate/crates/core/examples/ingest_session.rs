//! Parse hand-written CSVs for one user and align them onto the attention clock.

use attnfuse::ingest::{assemble_session, parse_attention, parse_frame_features, session_integrity_report, ModuleId};

fn main() -> attnfuse::Result<()> {
    let fps = 2;
    // Frame 3 is flagged invalid, frame 5 is absent altogether.
    let eb = "frame_index,valid,f_0\n0,1,0.01\n1,1,0.02\n2,1,0.97\n3,0,0.00\n4,1,0.03\n";
    let attention = "second_index,attention\n0,41\n1,44\n2,52\n";

    let stream = parse_frame_features(eb.as_bytes(), ModuleId::Eb, fps)?;
    let att = parse_attention(attention.as_bytes())?;
    let session = assemble_session("user01", vec![stream], att, fps)?;

    let s = session.stream(ModuleId::Eb)?;
    for slot in 0..s.slots() {
        println!("slot {slot}: {:?} {:?}", s.frame(slot), s.status[slot]);
    }
    println!("{}", serde_json::to_string_pretty(&session_integrity_report(&session)).unwrap());
    Ok(())
}
