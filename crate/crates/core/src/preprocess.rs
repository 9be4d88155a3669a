//! Squashing micro-commits that leave a source file unparseable.
//!
//! A maximal run of beads whose post-snapshots do not parse is folded into
//! the next bead that restores parseability. A run at the very end has no
//! such bead and is folded backward into the last parseable one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::diff_snapshots;
use crate::model::{ChangeBead, FineHistory, HistoryError, Snapshot};
use crate::structure::snapshot_parses;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SquashDirection {
    Forward,
    Backward,
}

/// One squash: original seqs folded into the surviving bead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquashEntry {
    pub absorbed: Vec<usize>,
    pub into: usize,
    pub direction: SquashDirection,
    /// The combined change was empty, so no bead survives.
    #[serde(default)]
    pub dropped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquashReport {
    pub entries: Vec<SquashEntry>,
}

impl SquashReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("no snapshot in the history parses")]
    AllUnparseable,
    #[error(transparent)]
    Replay(#[from] HistoryError),
}

fn squashed(template: &ChangeBead, timestamp: i64, pre: &Snapshot, post: &Snapshot) -> ChangeBead {
    let mut bead = template.clone();
    bead.timestamp = timestamp;
    bead.hunks = diff_snapshots(pre, post);
    bead.enclosing_class = None;
    bead.enclosing_method = None;
    bead
}

pub fn squash_unparseable(
    history: &FineHistory,
) -> Result<(FineHistory, SquashReport), PreprocessError> {
    let states = history.replay()?;
    if !snapshot_parses(&states[0]) {
        return Err(PreprocessError::AllUnparseable);
    }
    let parses: Vec<bool> = states[1..].iter().map(snapshot_parses).collect();
    if !history.is_empty() && !parses.iter().any(|&p| p) {
        return Err(PreprocessError::AllUnparseable);
    }

    let mut out: Vec<ChangeBead> = Vec::with_capacity(history.len());
    // Original seq of each output bead, for backward squashes.
    let mut origins: Vec<usize> = Vec::with_capacity(history.len());
    let mut report = SquashReport::default();
    let mut run_start: Option<usize> = None;

    for (i, bead) in history.beads.iter().enumerate() {
        if !parses[i] {
            run_start.get_or_insert(i);
            continue;
        }
        match run_start.take() {
            None => {
                out.push(bead.clone());
                origins.push(i);
            }
            Some(start) => {
                let merged = squashed(bead, bead.timestamp, &states[start], &states[i + 1]);
                let dropped = merged.hunks.is_empty();
                report.entries.push(SquashEntry {
                    absorbed: (start..i).collect(),
                    into: i,
                    direction: SquashDirection::Forward,
                    dropped,
                });
                if !dropped {
                    out.push(merged);
                    origins.push(i);
                }
            }
        }
    }

    if let Some(start) = run_start {
        let last = history.beads.last().expect("run is non-empty");
        let target = origins
            .pop()
            .expect("some post-snapshot parses, so an earlier bead survived");
        let template = out.pop().expect("origins and out stay aligned");
        let merged = squashed(&template, last.timestamp, &states[target], states.last().unwrap());
        let dropped = merged.hunks.is_empty();
        report.entries.push(SquashEntry {
            absorbed: (start..history.len()).collect(),
            into: target,
            direction: SquashDirection::Backward,
            dropped,
        });
        if !dropped {
            out.push(merged);
        }
    }

    if report.is_empty() {
        return Ok((history.clone(), report));
    }
    for (seq, bead) in out.iter_mut().enumerate() {
        bead.seq = seq;
    }
    let processed = FineHistory::new(history.base.clone(), out, history.origin.clone());
    Ok((processed, report))
}
