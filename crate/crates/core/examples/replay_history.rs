//! Loads a change log and prints every intermediate state of one file.
//!
//! cargo run --example replay_history [-- FILE.cbl]

use std::path::PathBuf;

use cbt_core::ingest::{ingest_change_log, SourceFilter};

fn main() -> anyhow::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig1.cbl")));
    let history = ingest_change_log(&path, &SourceFilter::default())?;
    let states = history.replay()?;
    for (k, state) in states.iter().enumerate() {
        match k.checked_sub(1).map(|i| &history.beads[i]) {
            None => println!("== base"),
            Some(bead) => println!("== after bead {} (t={})", bead.id, bead.timestamp),
        }
        for (path, text) in &state.files {
            println!("-- {path}");
            print!("{text}");
        }
    }
    Ok(())
}
