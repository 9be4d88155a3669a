//! The mutable tailoring state: a partition of the history that the user
//! reshapes by splitting and merging clusters, with undo and redo.
//!
//! Mutations take `&mut self`; a session has a single writer. Reads
//! (`augmented_diff`, `project_beads`) borrow immutably.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    BeadId, Cluster, ClusterId, FineHistory, HistoryError, Partition, PartitionError,
};
use crate::weave::{LineKind, Weave};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),
    #[error("cluster {0} is listed twice")]
    DuplicateCluster(ClusterId),
    #[error("the beads to split off must be a non-empty proper subset of cluster {0}")]
    NotProperSubset(ClusterId),
    #[error("merging needs at least two clusters")]
    FewerThanTwo,
    #[error("no clusters selected")]
    EmptySelection,
    #[error(
        "change {bead} (seq {seq}) cannot be shown without unselected change {blocking_bead} (seq {blocking_seq})"
    )]
    SelectionPatchConflict {
        seq: usize,
        bead: BeadId,
        blocking_seq: usize,
        blocking_bead: BeadId,
    },
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error("invalid partition: {0}")]
    InvalidPartition(#[from] PartitionError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// What undo and redo restore: the partition plus the id cursor, so a redo
/// reproduces ids and colors exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub partition: Partition,
    pub next_cluster_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedLine {
    pub kind: LineKind,
    /// Line text without its terminator.
    pub text: String,
    pub file: String,
    /// Owning cluster for added and removed lines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub owner: Option<ClusterId>,
    /// The change that inserted (added) or deleted (removed) the line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bead_id: Option<BeadId>,
    pub base_line: Option<usize>,
    pub result_line: Option<usize>,
}

/// Diff of the selected clusters' changes with each changed line
/// attributed to its cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedDiff {
    pub clusters: Vec<ClusterId>,
    pub lines: Vec<AugmentedLine>,
}

impl AugmentedDiff {
    pub fn changed_lines(&self) -> impl Iterator<Item = &AugmentedLine> {
        self.lines.iter().filter(|l| l.kind != LineKind::Context)
    }
}

/// One bead placed on the time × location map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub bead_id: BeadId,
    pub seq: usize,
    /// Epoch seconds; scaled by the client.
    pub x: i64,
    /// Lane index.
    pub y: usize,
    pub cluster_id: ClusterId,
    pub color: String,
    pub label: String,
    pub file: String,
    pub enclosing_class: Option<String>,
    pub enclosing_method: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ClusterSession {
    history: FineHistory,
    weave: Weave,
    deps: Vec<BTreeSet<usize>>,
    seqs: HashMap<BeadId, usize>,
    state: SessionState,
    undo_stack: Vec<SessionState>,
    redo_stack: Vec<SessionState>,
}

impl ClusterSession {
    /// Starts a session on an annotated history and its initial partition.
    pub fn new(history: FineHistory, partition: Partition) -> Result<Self, SessionError> {
        let next = partition.clusters.iter().map(|c| c.id.0).max().unwrap_or(0) + 1;
        Self::restore(history, partition, next)
    }

    /// Resumes with an explicit id cursor (e.g. from a saved session).
    pub fn restore(
        history: FineHistory,
        mut partition: Partition,
        next_cluster_id: u32,
    ) -> Result<Self, SessionError> {
        let seqs = history.seq_index();
        partition.normalize(&seqs);
        partition.validate(&history)?;
        let weave = Weave::build(&history)?;
        let deps = weave.dependencies();
        let floor = partition.clusters.iter().map(|c| c.id.0).max().unwrap_or(0) + 1;
        Ok(ClusterSession {
            history,
            weave,
            deps,
            seqs,
            state: SessionState {
                partition,
                next_cluster_id: next_cluster_id.max(floor),
            },
            undo_stack: Vec::new(),
            redo_stack: Vec::new(),
        })
    }

    pub fn history(&self) -> &FineHistory {
        &self.history
    }

    pub fn partition(&self) -> &Partition {
        &self.state.partition
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn weave(&self) -> &Weave {
        &self.weave
    }

    pub fn can_undo(&self) -> bool {
        !self.undo_stack.is_empty()
    }

    pub fn can_redo(&self) -> bool {
        !self.redo_stack.is_empty()
    }

    fn cluster(&self, id: ClusterId) -> Result<&Cluster, SessionError> {
        self.state
            .partition
            .cluster(id)
            .ok_or(SessionError::UnknownCluster(id))
    }

    fn commit(&mut self, mut next: SessionState) -> Result<(), SessionError> {
        next.partition.normalize(&self.seqs);
        next.partition.validate(&self.history)?;
        let previous = std::mem::replace(&mut self.state, next);
        self.undo_stack.push(previous);
        self.redo_stack.clear();
        Ok(())
    }

    /// Moves `beads` out of `cluster` into a new cluster with the next id
    /// and palette color.
    pub fn split_cluster(
        &mut self,
        cluster: ClusterId,
        beads: &[BeadId],
    ) -> Result<ClusterId, SessionError> {
        let source = self.cluster(cluster)?;
        let extracted: BTreeSet<&BeadId> = beads.iter().collect();
        if extracted.is_empty()
            || extracted.len() >= source.bead_ids.len()
            || extracted.iter().any(|b| !source.contains(b))
        {
            return Err(SessionError::NotProperSubset(cluster));
        }

        let new_id = ClusterId(self.state.next_cluster_id);
        let mut next = self.state.clone();
        next.next_cluster_id += 1;
        let kept = &mut next
            .partition
            .clusters
            .iter_mut()
            .find(|c| c.id == cluster)
            .expect("checked above")
            .bead_ids;
        kept.retain(|b| !extracted.contains(b));
        next.partition.clusters.push(Cluster::new(
            new_id,
            extracted.into_iter().cloned().collect(),
        ));
        self.commit(next)?;
        Ok(new_id)
    }

    /// Unites clusters under the id and color of the one holding the
    /// earliest bead.
    pub fn merge_clusters(&mut self, ids: &[ClusterId]) -> Result<ClusterId, SessionError> {
        if ids.len() < 2 {
            return Err(SessionError::FewerThanTwo);
        }
        let mut seen = BTreeSet::new();
        for &id in ids {
            if !seen.insert(id) {
                return Err(SessionError::DuplicateCluster(id));
            }
            self.cluster(id)?;
        }
        let first_seq = |c: &Cluster| self.seqs[&c.bead_ids[0]];
        let survivor = ids
            .iter()
            .map(|&id| self.cluster(id).expect("checked"))
            .min_by_key(|c| first_seq(c))
            .expect("at least two")
            .id;

        let mut next = self.state.clone();
        let mut absorbed = Vec::new();
        next.partition.clusters.retain(|c| {
            if c.id != survivor && seen.contains(&c.id) {
                absorbed.extend(c.bead_ids.iter().cloned());
                false
            } else {
                true
            }
        });
        next.partition
            .clusters
            .iter_mut()
            .find(|c| c.id == survivor)
            .expect("survivor kept")
            .bead_ids
            .extend(absorbed);
        self.commit(next)?;
        Ok(survivor)
    }

    pub fn undo(&mut self) -> Result<(), SessionError> {
        let previous = self.undo_stack.pop().ok_or(SessionError::NothingToUndo)?;
        let current = std::mem::replace(&mut self.state, previous);
        self.redo_stack.push(current);
        Ok(())
    }

    pub fn redo(&mut self) -> Result<(), SessionError> {
        let next = self.redo_stack.pop().ok_or(SessionError::NothingToRedo)?;
        let current = std::mem::replace(&mut self.state, next);
        self.undo_stack.push(current);
        Ok(())
    }

    /// Diff of the selected clusters' changes against the snapshot before
    /// their earliest change, skipping unselected changes in between.
    /// `context` limits unchanged lines around each change; `None` keeps
    /// whole files.
    pub fn augmented_diff(
        &self,
        selected: &[ClusterId],
        context: Option<usize>,
    ) -> Result<AugmentedDiff, SessionError> {
        if selected.is_empty() {
            return Err(SessionError::EmptySelection);
        }
        let mut chosen: BTreeSet<usize> = BTreeSet::new();
        let mut owner_of: HashMap<usize, ClusterId> = HashMap::new();
        for &id in selected {
            for bead in &self.cluster(id)?.bead_ids {
                let seq = self.seqs[bead];
                chosen.insert(seq);
                owner_of.insert(seq, id);
            }
        }
        let first = *chosen.first().expect("clusters are non-empty");
        for &seq in &chosen {
            if let Some(&blocking) = self.deps[seq]
                .iter()
                .find(|&&v| v >= first && !chosen.contains(&v))
            {
                return Err(SessionError::SelectionPatchConflict {
                    seq,
                    bead: self.history.beads[seq].id.clone(),
                    blocking_seq: blocking,
                    blocking_bead: self.history.beads[blocking].id.clone(),
                });
            }
        }

        let raw = self
            .weave
            .diff(|i| i < first, |i| i < first || chosen.contains(&i));
        let keep = context_mask(&raw.iter().map(|l| (l.file.as_str(), l.kind)).collect::<Vec<_>>(), context);
        let lines = raw
            .into_iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(l, _)| {
                let bead = match l.kind {
                    LineKind::Added => l.born,
                    LineKind::Removed => l.killed,
                    LineKind::Context => None,
                };
                AugmentedLine {
                    kind: l.kind,
                    text: l.text.trim_end_matches(['\n', '\r']).to_string(),
                    file: l.file,
                    owner: bead.map(|b| owner_of[&b]),
                    bead_id: bead.map(|b| self.history.beads[b].id.clone()),
                    base_line: l.before_line,
                    result_line: l.after_line,
                }
            })
            .collect();
        Ok(AugmentedDiff {
            clusters: selected.to_vec(),
            lines,
        })
    }

    /// Places beads on the map: x is the timestamp, y the lane of the
    /// bead's (file, class, method), lanes numbered by first appearance.
    pub fn project_beads(&self) -> Vec<MapPoint> {
        let mut lanes: Vec<(String, Option<String>, Option<String>)> = Vec::new();
        self.history
            .beads
            .iter()
            .map(|bead| {
                let file = bead.primary_file().unwrap_or_default().to_string();
                let key = (
                    file.clone(),
                    bead.enclosing_class.clone(),
                    bead.enclosing_method.clone(),
                );
                let lane = match lanes.iter().position(|k| *k == key) {
                    Some(lane) => lane,
                    None => {
                        lanes.push(key);
                        lanes.len() - 1
                    }
                };
                let cluster = self
                    .state
                    .partition
                    .clusters
                    .iter()
                    .find(|c| c.contains(&bead.id))
                    .expect("partition covers every bead");
                let label = bead
                    .enclosing_method
                    .clone()
                    .or_else(|| bead.enclosing_class.clone())
                    .unwrap_or_else(|| file.clone());
                MapPoint {
                    bead_id: bead.id.clone(),
                    seq: bead.seq,
                    x: bead.timestamp,
                    y: lane,
                    cluster_id: cluster.id,
                    color: cluster.color.clone(),
                    label,
                    file,
                    enclosing_class: bead.enclosing_class.clone(),
                    enclosing_method: bead.enclosing_method.clone(),
                }
            })
            .collect()
    }
}

/// Which lines survive when unchanged lines are limited to `context` on
/// either side of a change (per file).
fn context_mask(lines: &[(&str, LineKind)], context: Option<usize>) -> Vec<bool> {
    let changed = |i: usize| lines[i].1 != LineKind::Context;
    let file_has_change: HashMap<&str, bool> = lines.iter().fold(HashMap::new(), |mut m, (f, k)| {
        *m.entry(*f).or_insert(false) |= *k != LineKind::Context;
        m
    });
    let Some(context) = context else {
        return lines.iter().map(|(f, _)| file_has_change[f]).collect();
    };
    let mut keep: Vec<bool> = (0..lines.len()).map(changed).collect();
    for i in (0..lines.len()).filter(|&i| changed(i)) {
        let file = lines[i].0;
        for j in (i.saturating_sub(context)..i).rev() {
            if lines[j].0 != file {
                break;
            }
            keep[j] = true;
        }
        for j in i + 1..(i + 1 + context).min(lines.len()) {
            if lines[j].0 != file {
                break;
            }
            keep[j] = true;
        }
    }
    keep
}
