//! Folds edits that leave a file unparseable into the edit that repairs it.
//!
//! cargo run --example squash_unparseable

use cbt_core::preprocess::squash_unparseable;
use cbt_core::{ChangeBead, FineHistory, Hunk, Origin, Snapshot};

fn insert(seq: usize, start: usize, text: &str) -> ChangeBead {
    ChangeBead::new(
        (seq + 1).to_string(),
        seq,
        60 * seq as i64,
        vec![Hunk::new("Demo.java", start, vec![], vec![format!("{text}\n")])],
    )
}

fn main() -> anyhow::Result<()> {
    let base = Snapshot::from_files([("Demo.java", "class Demo {\n}\n")]);
    let history = FineHistory::new(
        base,
        vec![
            insert(0, 2, "    int a;"),
            insert(1, 3, "    void m() {"),
            insert(2, 4, "        a++;"),
            insert(3, 5, "    }"),
            insert(4, 6, "    int b;"),
        ],
        Origin::in_memory("demo"),
    );
    let (cleaned, report) = squash_unparseable(&history)?;
    println!("{} beads -> {} beads", history.len(), cleaned.len());
    for entry in &report.entries {
        println!(
            "seqs {:?} folded {:?} into seq {}{}",
            entry.absorbed,
            entry.direction,
            entry.into,
            if entry.dropped { " (cancelled out)" } else { "" }
        );
    }
    for bead in &cleaned.beads {
        println!("bead {} seq {} t={}", bead.id, bead.seq, bead.timestamp);
    }
    assert_eq!(cleaned.final_snapshot()?, history.final_snapshot()?);
    Ok(())
}
