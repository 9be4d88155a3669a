//! Writes the sample history as a linear Git repository of micro-commits,
//! then ingests it back.
//!
//! cargo run --example ingest_git

use cbt_core::fixtures::fig1_history;
use cbt_core::ingest::git::materialize_history;
use cbt_core::ingest::{ingest_git, SourceFilter};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let commits = materialize_history(&fig1_history(), dir.path())?;
    println!("created {} commits in {}", commits.len(), dir.path().display());

    let history = ingest_git(dir.path(), "HEAD", &SourceFilter::default())?;
    for bead in &history.beads {
        let lines: usize = bead.hunks.iter().map(|h| h.deleted.len() + h.inserted.len()).sum();
        println!(
            "seq {} commit {} t={} {} hunk(s), {} changed line(s)",
            bead.seq,
            &bead.id.as_str()[..10],
            bead.timestamp,
            bead.hunks.len(),
            lines
        );
    }
    assert_eq!(history.final_snapshot()?, fig1_history().final_snapshot()?);
    Ok(())
}
