//! Writes the state-machine history as a change log.
//!
//! cargo run --example write_fig1_fixture [-- PATH]

use std::path::PathBuf;

use cbt_core::fixtures::fig1_change_log;

fn main() -> anyhow::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig1.cbl")));
    std::fs::write(&path, fig1_change_log())?;
    println!("wrote {}", path.display());
    Ok(())
}
