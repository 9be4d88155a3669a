//! Value types shared by every stage: hunks, change beads, snapshots,
//! clusters and partitions.
//!
//! Every line of text handled here keeps its line terminator, so a file is
//! exactly the concatenation of its lines and a missing final newline
//! survives any number of replays.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Splits text into lines, each keeping its trailing `\n` (the last line may
/// lack one).
pub fn split_lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

/// A contiguous block of deleted and inserted lines in one file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    pub file: String,
    /// 1-based line index into the pre-change file.
    pub start: usize,
    pub deleted: Vec<String>,
    pub inserted: Vec<String>,
}

impl Hunk {
    pub fn new(
        file: impl Into<String>,
        start: usize,
        deleted: Vec<String>,
        inserted: Vec<String>,
    ) -> Self {
        Hunk {
            file: file.into(),
            start,
            deleted,
            inserted,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty() && self.inserted.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeadId(pub String);

impl BeadId {
    pub fn new(id: impl Into<String>) -> Self {
        BeadId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl From<&str> for BeadId {
    fn from(s: &str) -> Self {
        BeadId(s.to_string())
    }
}

/// One fine-grained change (a micro-commit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeBead {
    pub id: BeadId,
    /// 0-based position in the fine-grained history.
    pub seq: usize,
    /// Epoch seconds.
    pub timestamp: i64,
    pub hunks: Vec<Hunk>,
    #[serde(default)]
    pub enclosing_class: Option<String>,
    #[serde(default)]
    pub enclosing_method: Option<String>,
}

impl ChangeBead {
    pub fn new(id: impl Into<String>, seq: usize, timestamp: i64, hunks: Vec<Hunk>) -> Self {
        ChangeBead {
            id: BeadId::new(id),
            seq,
            timestamp,
            hunks,
            enclosing_class: None,
            enclosing_method: None,
        }
    }

    /// The file of the first hunk; structural identity is taken from it.
    pub fn primary_file(&self) -> Option<&str> {
        self.hunks.first().map(|h| h.file.as_str())
    }

    pub fn files(&self) -> Vec<&str> {
        let mut files: Vec<&str> = self.hunks.iter().map(|h| h.file.as_str()).collect();
        files.sort_unstable();
        files.dedup();
        files
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("patch mismatch in {file} at line {line}")]
pub struct PatchMismatch {
    pub file: String,
    pub line: usize,
}

/// Full text content of every tracked file at one point in history.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Snapshot {
    pub files: BTreeMap<String, String>,
}

impl Snapshot {
    pub fn new() -> Self {
        Snapshot::default()
    }

    /// Builds a snapshot; empty files are treated as absent.
    pub fn from_files<I, K, V>(files: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let files = files
            .into_iter()
            .map(|(k, v)| (k.into(), v.into()))
            .filter(|(_, v): &(String, String)| !v.is_empty())
            .collect();
        Snapshot { files }
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Applies hunks with exact matching. Hunks are grouped per file and
    /// applied in ascending start order; all starts refer to the
    /// pre-change file.
    pub fn apply(&self, hunks: &[Hunk]) -> Result<Snapshot, PatchMismatch> {
        let mut by_file: BTreeMap<&str, Vec<&Hunk>> = BTreeMap::new();
        for hunk in hunks {
            by_file.entry(hunk.file.as_str()).or_default().push(hunk);
        }

        let mut out = self.clone();
        for (file, mut file_hunks) in by_file {
            file_hunks.sort_by_key(|h| h.start);
            let before = self.get(file).unwrap_or("");
            let after = apply_to_text(file, before, &file_hunks)?;
            if after.is_empty() {
                out.files.remove(file);
            } else {
                out.files.insert(file.to_string(), after);
            }
        }
        Ok(out)
    }
}

fn apply_to_text(file: &str, text: &str, hunks: &[&Hunk]) -> Result<String, PatchMismatch> {
    let lines = split_lines(text);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0usize;
    for hunk in hunks {
        let mismatch = |line: usize| PatchMismatch {
            file: file.to_string(),
            line,
        };
        if hunk.start == 0 {
            return Err(mismatch(0));
        }
        let at = hunk.start - 1;
        if at < cursor || at + hunk.deleted.len() > lines.len() {
            return Err(mismatch(hunk.start));
        }
        for (offset, expected) in hunk.deleted.iter().enumerate() {
            if lines[at + offset] != expected {
                return Err(mismatch(hunk.start + offset));
            }
        }
        lines[cursor..at].iter().for_each(|l| out.push_str(l));
        hunk.inserted.iter().for_each(|l| out.push_str(l));
        cursor = at + hunk.deleted.len();
    }
    lines[cursor..].iter().for_each(|l| out.push_str(l));
    Ok(out)
}

/// Applies one bead to a snapshot; `base` is left untouched.
pub fn apply_hunks(base: &Snapshot, bead: &ChangeBead) -> Result<Snapshot, PatchMismatch> {
    base.apply(&bead.hunks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginFormat {
    Git,
    ChangeLog,
    InMemory,
}

/// Where a history came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub source: String,
    pub format: OriginFormat,
    #[serde(default)]
    pub commits: Vec<String>,
}

impl Origin {
    pub fn in_memory(name: &str) -> Self {
        Origin {
            source: name.to_string(),
            format: OriginFormat::InMemory,
            commits: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("snapshot index {index} is past the end of a history of {len} beads")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("bead {id} has seq {seq}, expected {expected}")]
    NonDenseSeq {
        id: BeadId,
        seq: usize,
        expected: usize,
    },
    #[error("bead {id} is older than its predecessor")]
    TimestampRegression { id: BeadId },
    #[error("bead {id} has no hunks")]
    EmptyBead { id: BeadId },
    #[error("bead {id} contains an empty hunk")]
    EmptyHunk { id: BeadId },
    #[error("bead id {id} appears twice")]
    DuplicateId { id: BeadId },
    #[error("bead {id} has an enclosing method but no enclosing class")]
    MethodWithoutClass { id: BeadId },
    #[error("replay failed at bead seq {seq}: {source}")]
    Replay {
        seq: usize,
        #[source]
        source: PatchMismatch,
    },
}

/// A base snapshot plus the ordered beads replayed on top of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineHistory {
    pub base: Snapshot,
    pub beads: Vec<ChangeBead>,
    pub origin: Origin,
}

impl FineHistory {
    pub fn new(base: Snapshot, beads: Vec<ChangeBead>, origin: Origin) -> Self {
        FineHistory {
            base,
            beads,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.beads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beads.is_empty()
    }

    pub fn bead(&self, id: &BeadId) -> Option<&ChangeBead> {
        self.beads.iter().find(|b| &b.id == id)
    }

    /// Map from bead id to seq.
    pub fn seq_index(&self) -> HashMap<BeadId, usize> {
        self.beads.iter().map(|b| (b.id.clone(), b.seq)).collect()
    }

    /// Checks the structural invariants of the bead list (not replay).
    pub fn check_beads(&self) -> Result<(), HistoryError> {
        let mut seen = HashSet::new();
        let mut last_ts = i64::MIN;
        for (expected, bead) in self.beads.iter().enumerate() {
            if bead.seq != expected {
                return Err(HistoryError::NonDenseSeq {
                    id: bead.id.clone(),
                    seq: bead.seq,
                    expected,
                });
            }
            if !seen.insert(&bead.id) {
                return Err(HistoryError::DuplicateId {
                    id: bead.id.clone(),
                });
            }
            if bead.timestamp < last_ts {
                return Err(HistoryError::TimestampRegression {
                    id: bead.id.clone(),
                });
            }
            last_ts = bead.timestamp;
            if bead.hunks.is_empty() {
                return Err(HistoryError::EmptyBead {
                    id: bead.id.clone(),
                });
            }
            if bead.hunks.iter().any(Hunk::is_empty) {
                return Err(HistoryError::EmptyHunk {
                    id: bead.id.clone(),
                });
            }
            if bead.enclosing_method.is_some() && bead.enclosing_class.is_none() {
                return Err(HistoryError::MethodWithoutClass {
                    id: bead.id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Snapshot after applying beads `0..k`.
    pub fn snapshot_at(&self, k: usize) -> Result<Snapshot, HistoryError> {
        snapshot_at(&self.beads, &self.base, k)
    }

    /// All snapshots `0..=N`; element `k` is the state before bead `k`.
    pub fn replay(&self) -> Result<Vec<Snapshot>, HistoryError> {
        let mut states = Vec::with_capacity(self.beads.len() + 1);
        states.push(self.base.clone());
        for bead in &self.beads {
            let next = apply_hunks(states.last().expect("non-empty"), bead).map_err(|source| {
                HistoryError::Replay {
                    seq: bead.seq,
                    source,
                }
            })?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn final_snapshot(&self) -> Result<Snapshot, HistoryError> {
        self.snapshot_at(self.beads.len())
    }
}

/// Replays the first `k` beads on top of `base`.
pub fn snapshot_at(beads: &[ChangeBead], base: &Snapshot, k: usize) -> Result<Snapshot, HistoryError> {
    if k > beads.len() {
        return Err(HistoryError::IndexOutOfRange {
            index: k,
            len: beads.len(),
        });
    }
    let mut state = base.clone();
    for bead in &beads[..k] {
        state = apply_hunks(&state, bead).map_err(|source| HistoryError::Replay {
            seq: bead.seq,
            source,
        })?;
    }
    Ok(state)
}

/// Display palette; cluster creation order indexes it, cycling after 12.
pub const PALETTE: [&str; 12] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324",
    "#469990", "#800000", "#808000", "#000075",
];

/// Cluster ids are handed out in creation order starting at 1, so the id
/// alone determines the palette slot.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl ClusterId {
    pub fn color(self) -> String {
        let slot = (self.0.max(1) - 1) as usize % PALETTE.len();
        PALETTE[slot].to_string()
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A candidate untangled commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub bead_ids: Vec<BeadId>,
    pub color: String,
}

impl Cluster {
    pub fn new(id: ClusterId, bead_ids: Vec<BeadId>) -> Self {
        Cluster {
            id,
            color: id.color(),
            bead_ids,
        }
    }

    pub fn contains(&self, bead: &BeadId) -> bool {
        self.bead_ids.contains(bead)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("cluster {0} is empty")]
    EmptyCluster(ClusterId),
    #[error("cluster id {0} appears twice")]
    DuplicateCluster(ClusterId),
    #[error("bead {0} is not part of the history")]
    UnknownBead(BeadId),
    #[error("bead {0} belongs to more than one cluster")]
    Overlap(BeadId),
    #[error("bead {0} is not covered by any cluster")]
    Uncovered(BeadId),
    #[error("cluster {0} is not sorted by seq")]
    Unsorted(ClusterId),
    #[error("clusters are not ordered by their earliest bead")]
    Misordered,
}

/// A set partition of the history's beads into clusters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub clusters: Vec<Cluster>,
}

impl Partition {
    pub fn new(clusters: Vec<Cluster>) -> Self {
        Partition { clusters }
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.id == id)
    }

    pub fn cluster_of(&self, bead: &BeadId) -> Option<ClusterId> {
        self.clusters.iter().find(|c| c.contains(bead)).map(|c| c.id)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Bead-id sets, sorted, for order-insensitive comparisons.
    pub fn as_sets(&self) -> Vec<Vec<BeadId>> {
        let mut sets: Vec<Vec<BeadId>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut ids = c.bead_ids.clone();
                ids.sort();
                ids
            })
            .collect();
        sets.sort();
        sets
    }

    /// Sorts beads inside each cluster by seq and clusters by earliest seq.
    pub fn normalize(&mut self, seqs: &HashMap<BeadId, usize>) {
        let seq_of = |id: &BeadId| seqs.get(id).copied().unwrap_or(usize::MAX);
        for cluster in &mut self.clusters {
            cluster.bead_ids.sort_by_key(|id| seq_of(id));
        }
        self.clusters
            .sort_by_key(|c| c.bead_ids.first().map(seq_of).unwrap_or(usize::MAX));
    }

    /// Checks disjointness, coverage and ordering against a history.
    pub fn validate(&self, history: &FineHistory) -> Result<(), PartitionError> {
        let seqs = history.seq_index();
        let mut owner: HashSet<&BeadId> = HashSet::new();
        let mut ids = HashSet::new();
        let mut last_first = None;
        for cluster in &self.clusters {
            if !ids.insert(cluster.id) {
                return Err(PartitionError::DuplicateCluster(cluster.id));
            }
            if cluster.bead_ids.is_empty() {
                return Err(PartitionError::EmptyCluster(cluster.id));
            }
            let mut prev = None;
            for bead in &cluster.bead_ids {
                let seq = *seqs
                    .get(bead)
                    .ok_or_else(|| PartitionError::UnknownBead(bead.clone()))?;
                if !owner.insert(bead) {
                    return Err(PartitionError::Overlap(bead.clone()));
                }
                if prev.is_some_and(|p| p >= seq) {
                    return Err(PartitionError::Unsorted(cluster.id));
                }
                prev = Some(seq);
            }
            let first = seqs[&cluster.bead_ids[0]];
            if last_first.is_some_and(|l| l > first) {
                return Err(PartitionError::Misordered);
            }
            last_first = Some(first);
        }
        if let Some(missing) = history.beads.iter().find(|b| !owner.contains(&b.id)) {
            return Err(PartitionError::Uncovered(missing.id.clone()));
        }
        Ok(())
    }
}
