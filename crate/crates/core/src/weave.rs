//! Line identities across a history.
//!
//! Every line that ever exists gets one record holding its text, the bead
//! that inserted it (`None` for base lines) and the bead that deleted it, if
//! any. Records are kept in an order in which every replayed snapshot is a
//! subsequence, so the state after any subset of beads can be rendered by
//! filtering. Reordering beads is then a matter of choosing subsets; a bead
//! can be applied only once the beads that inserted the lines it deletes
//! are present.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{FineHistory, HistoryError, Hunk, Snapshot};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineRecord {
    pub text: String,
    pub born: Option<usize>,
    pub killed: Option<usize>,
}

impl LineRecord {
    /// Whether the line exists once exactly the beads accepted by
    /// `included` have been applied.
    pub fn alive(&self, included: &impl Fn(usize) -> bool) -> bool {
        self.born.is_none_or(included) && !self.killed.is_some_and(included)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Context,
    Added,
    Removed,
}

/// One line of a diff between two weave states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeaveLine {
    pub file: String,
    pub kind: LineKind,
    pub text: String,
    /// 1-based line number in the before state, for context and removed lines.
    pub before_line: Option<usize>,
    /// 1-based line number in the after state, for context and added lines.
    pub after_line: Option<usize>,
    pub born: Option<usize>,
    pub killed: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Weave {
    files: BTreeMap<String, Vec<LineRecord>>,
    bead_count: usize,
}

impl Weave {
    /// Replays the history, recording where each line comes from.
    pub fn build(history: &FineHistory) -> Result<Weave, HistoryError> {
        let mut weave = Weave {
            files: BTreeMap::new(),
            bead_count: history.len(),
        };
        for (path, text) in &history.base.files {
            let records = crate::model::split_lines(text)
                .into_iter()
                .map(|l| LineRecord {
                    text: l.to_string(),
                    born: None,
                    killed: None,
                })
                .collect();
            weave.files.insert(path.clone(), records);
        }

        // Exact-match validation uses the same rules as plain replay.
        let mut state = history.base.clone();
        for (i, bead) in history.beads.iter().enumerate() {
            state = crate::model::apply_hunks(&state, bead)
                .map_err(|source| HistoryError::Replay { seq: bead.seq, source })?;

            let mut by_file: BTreeMap<&str, Vec<&Hunk>> = BTreeMap::new();
            for h in &bead.hunks {
                by_file.entry(h.file.as_str()).or_default().push(h);
            }
            for (file, mut hunks) in by_file {
                hunks.sort_by_key(|h| h.start);
                let records = weave.files.entry(file.to_string()).or_default();
                let alive: Vec<usize> = records
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.killed.is_none())
                    .map(|(idx, _)| idx)
                    .collect();
                for hunk in hunks.iter().rev() {
                    let first = hunk.start - 1;
                    for &idx in &alive[first..first + hunk.deleted.len()] {
                        records[idx].killed = Some(i);
                    }
                    let at = if !hunk.deleted.is_empty() {
                        alive[first + hunk.deleted.len() - 1] + 1
                    } else if first > 0 {
                        alive[first - 1] + 1
                    } else {
                        0
                    };
                    let born = hunk.inserted.iter().map(|text| LineRecord {
                        text: text.clone(),
                        born: Some(i),
                        killed: None,
                    });
                    records.splice(at..at, born);
                }
            }
        }
        Ok(weave)
    }

    pub fn bead_count(&self) -> usize {
        self.bead_count
    }

    pub fn files(&self) -> impl Iterator<Item = (&str, &[LineRecord])> {
        self.files.iter().map(|(p, r)| (p.as_str(), r.as_slice()))
    }

    /// The snapshot after applying exactly the beads accepted by `included`.
    pub fn render(&self, included: impl Fn(usize) -> bool) -> Snapshot {
        Snapshot::from_files(self.files.iter().map(|(path, records)| {
            let text: String = records
                .iter()
                .filter(|r| r.alive(&included))
                .map(|r| r.text.as_str())
                .collect();
            (path.clone(), text)
        }))
    }

    /// For each bead, the beads that inserted lines it deletes.
    pub fn dependencies(&self) -> Vec<BTreeSet<usize>> {
        let mut deps = vec![BTreeSet::new(); self.bead_count];
        for records in self.files.values() {
            for r in records {
                if let (Some(born), Some(killed)) = (r.born, r.killed) {
                    deps[killed].insert(born);
                }
            }
        }
        deps
    }

    /// Line diff from the `before` state to the `after` state, in file and
    /// line order, with removed lines ahead of added lines inside each
    /// changed block.
    pub fn diff(
        &self,
        before: impl Fn(usize) -> bool,
        after: impl Fn(usize) -> bool,
    ) -> Vec<WeaveLine> {
        let mut out = Vec::new();
        for (path, records) in &self.files {
            let (mut b_line, mut a_line) = (0usize, 0usize);
            let mut removed: Vec<WeaveLine> = Vec::new();
            let mut added: Vec<WeaveLine> = Vec::new();
            for r in records {
                let (in_b, in_a) = (r.alive(&before), r.alive(&after));
                let line = |kind, before_line, after_line| WeaveLine {
                    file: path.clone(),
                    kind,
                    text: r.text.clone(),
                    before_line,
                    after_line,
                    born: r.born,
                    killed: r.killed,
                };
                match (in_b, in_a) {
                    (true, true) => {
                        b_line += 1;
                        a_line += 1;
                        let ctx = line(LineKind::Context, Some(b_line), Some(a_line));
                        out.append(&mut removed);
                        out.append(&mut added);
                        out.push(ctx);
                    }
                    (true, false) => {
                        b_line += 1;
                        removed.push(line(LineKind::Removed, Some(b_line), None));
                    }
                    (false, true) => {
                        a_line += 1;
                        added.push(line(LineKind::Added, None, Some(a_line)));
                    }
                    (false, false) => {}
                }
            }
            out.append(&mut removed);
            out.append(&mut added);
        }
        out
    }
}

/// Groups a weave diff into hunks against the before state.
pub fn hunks_from_diff(lines: &[WeaveLine]) -> Vec<Hunk> {
    let mut hunks: Vec<Hunk> = Vec::new();
    let mut open = false;
    let mut file = "";
    let mut before_seen = 0usize;
    for line in lines {
        if line.file != file {
            file = &line.file;
            before_seen = 0;
            open = false;
        }
        match line.kind {
            LineKind::Context => {
                before_seen += 1;
                open = false;
            }
            kind => {
                if !open {
                    hunks.push(Hunk::new(file, before_seen + 1, vec![], vec![]));
                    open = true;
                }
                let h = hunks.last_mut().expect("just pushed");
                if kind == LineKind::Removed {
                    before_seen += 1;
                    h.deleted.push(line.text.clone());
                } else {
                    h.inserted.push(line.text.clone());
                }
            }
        }
    }
    hunks
}
