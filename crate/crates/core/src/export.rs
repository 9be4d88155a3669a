//! Turning an accepted partition into one commit per cluster.
//!
//! Clusters are reordered so that every cluster comes after the clusters
//! whose lines it deletes, then each cluster's changes are squashed into a
//! single commit.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::git::{GitError, Repo};
use crate::ingest::changelog::WireHunk;
use crate::model::{
    BeadId, ClusterId, FineHistory, HistoryError, Hunk, Partition, PartitionError, PatchMismatch,
    Snapshot,
};
use crate::weave::{hunks_from_diff, Weave};

pub const DEFAULT_MESSAGE_TEMPLATE: &str =
    "Cluster {cluster_id}: {bead_count} changes in {methods}\n\nClasses: {classes}\nTime: {time_range}\n";

/// Bead `bead` of cluster `cluster` deletes a line inserted by bead
/// `depends_on_bead` of cluster `depends_on`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyWitness {
    pub cluster: ClusterId,
    pub bead: BeadId,
    pub depends_on: ClusterId,
    pub depends_on_bead: BeadId,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("clusters {} depend on each other; merge them or re-split", format_ids(.clusters))]
    CyclicClusterDependency {
        clusters: Vec<ClusterId>,
        witnesses: Vec<DependencyWitness>,
    },
    #[error("output path {0} exists and is not empty")]
    OutputExists(PathBuf),
    #[error("planned commit for cluster {cluster} does not apply: {source}")]
    Patch {
        cluster: ClusterId,
        #[source]
        source: PatchMismatch,
    },
    #[error("invalid partition: {0}")]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Git(#[from] GitError),
}

fn format_ids(ids: &[ClusterId]) -> String {
    ids.iter().map(ClusterId::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedCommit {
    pub cluster_id: ClusterId,
    pub bead_ids: Vec<BeadId>,
    /// Combined change against the previous planned commit.
    pub hunks: Vec<Hunk>,
    /// Latest bead timestamp, clamped to be non-decreasing along the plan.
    pub timestamp: i64,
    pub first_timestamp: i64,
    pub last_timestamp: i64,
    pub classes: Vec<String>,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPlan {
    pub base: Snapshot,
    pub base_timestamp: i64,
    pub commits: Vec<PlannedCommit>,
}

impl ExportPlan {
    pub fn order(&self) -> Vec<ClusterId> {
        self.commits.iter().map(|c| c.cluster_id).collect()
    }

    /// Snapshots after the base and after each planned commit.
    pub fn replay(&self) -> Result<Vec<Snapshot>, ExportError> {
        let mut states = vec![self.base.clone()];
        for commit in &self.commits {
            let next = states
                .last()
                .expect("starts with the base")
                .apply(&commit.hunks)
                .map_err(|source| ExportError::Patch {
                    cluster: commit.cluster_id,
                    source,
                })?;
            states.push(next);
        }
        Ok(states)
    }
}

/// Cluster-level dependency edges with one witnessing bead pair each.
fn cluster_edges(
    history: &FineHistory,
    partition: &Partition,
    weave: &Weave,
) -> BTreeMap<(ClusterId, ClusterId), DependencyWitness> {
    let owner: HashMap<&BeadId, ClusterId> = partition
        .clusters
        .iter()
        .flat_map(|c| c.bead_ids.iter().map(move |b| (b, c.id)))
        .collect();
    let mut edges = BTreeMap::new();
    for (u, deps) in weave.dependencies().into_iter().enumerate() {
        let bead = &history.beads[u].id;
        let cu = owner[bead];
        for v in deps {
            let on = &history.beads[v].id;
            let cv = owner[on];
            if cu != cv {
                edges.entry((cu, cv)).or_insert_with(|| DependencyWitness {
                    cluster: cu,
                    bead: bead.clone(),
                    depends_on: cv,
                    depends_on_bead: on.clone(),
                });
            }
        }
    }
    edges
}

/// A cycle among the clusters left over by the topological sort.
fn find_cycle(
    remaining: &BTreeSet<ClusterId>,
    edges: &BTreeMap<(ClusterId, ClusterId), DependencyWitness>,
) -> Vec<ClusterId> {
    // Every leftover node has an outgoing edge to another leftover node, so
    // walking forward must revisit a node.
    let next = |c: ClusterId| {
        edges
            .keys()
            .find(|(from, to)| *from == c && remaining.contains(to))
            .map(|&(_, to)| to)
            .expect("leftover clusters keep an unresolved dependency")
    };
    let mut path = vec![*remaining.first().expect("non-empty")];
    loop {
        let to = next(*path.last().expect("non-empty"));
        if let Some(pos) = path.iter().position(|&c| c == to) {
            return path.split_off(pos);
        }
        path.push(to);
    }
}

pub fn plan_export(history: &FineHistory, partition: &Partition) -> Result<ExportPlan, ExportError> {
    partition.validate(history)?;
    let weave = Weave::build(history)?;
    let seqs = history.seq_index();
    let edges = cluster_edges(history, partition, &weave);

    let first_seq: HashMap<ClusterId, usize> = partition
        .clusters
        .iter()
        .map(|c| (c.id, c.bead_ids.iter().map(|b| seqs[b]).min().expect("non-empty")))
        .collect();
    let mut pending: HashMap<ClusterId, usize> = partition.clusters.iter().map(|c| (c.id, 0)).collect();
    for &(from, _) in edges.keys() {
        *pending.get_mut(&from).expect("known cluster") += 1;
    }
    let mut ready: BinaryHeap<Reverse<(usize, ClusterId)>> = pending
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(&c, _)| Reverse((first_seq[&c], c)))
        .collect();
    let mut order = Vec::with_capacity(partition.len());
    while let Some(Reverse((_, c))) = ready.pop() {
        order.push(c);
        for &(from, _) in edges.keys().filter(|(_, to)| *to == c) {
            let n = pending.get_mut(&from).expect("known cluster");
            *n -= 1;
            if *n == 0 {
                ready.push(Reverse((first_seq[&from], from)));
            }
        }
    }
    if order.len() < partition.len() {
        let placed: BTreeSet<ClusterId> = order.iter().copied().collect();
        let remaining: BTreeSet<ClusterId> = partition
            .clusters
            .iter()
            .map(|c| c.id)
            .filter(|c| !placed.contains(c))
            .collect();
        let cycle = find_cycle(&remaining, &edges);
        let witnesses = cycle
            .iter()
            .zip(cycle.iter().cycle().skip(1))
            .map(|(&a, &b)| edges[&(a, b)].clone())
            .collect();
        return Err(ExportError::CyclicClusterDependency {
            clusters: cycle,
            witnesses,
        });
    }

    let mut included = vec![false; history.len()];
    let mut commits = Vec::with_capacity(order.len());
    let base_timestamp = history.beads.iter().map(|b| b.timestamp).min().unwrap_or(0);
    let mut clock = base_timestamp;
    for id in order {
        let cluster = partition.cluster(id).expect("ordered ids come from the partition");
        let before = included.clone();
        let beads: Vec<_> = cluster.bead_ids.iter().map(|b| &history.beads[seqs[b]]).collect();
        for b in &beads {
            included[b.seq] = true;
        }
        let hunks = hunks_from_diff(&weave.diff(|i| before[i], |i| included[i]));

        let first_timestamp = beads.iter().map(|b| b.timestamp).min().expect("non-empty");
        let last_timestamp = beads.iter().map(|b| b.timestamp).max().expect("non-empty");
        clock = clock.max(last_timestamp);
        let classes: BTreeSet<String> = beads.iter().filter_map(|b| b.enclosing_class.clone()).collect();
        let methods: BTreeSet<String> = beads.iter().filter_map(|b| b.enclosing_method.clone()).collect();
        commits.push(PlannedCommit {
            cluster_id: id,
            bead_ids: cluster.bead_ids.clone(),
            hunks,
            timestamp: clock,
            first_timestamp,
            last_timestamp,
            classes: classes.into_iter().collect(),
            methods: methods.into_iter().collect(),
        });
    }

    Ok(ExportPlan {
        base: history.base.clone(),
        base_timestamp,
        commits,
    })
}

fn format_time(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}

fn join_or_dash(items: &[String]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.join(", ")
    }
}

/// Fills `{cluster_id}`, `{bead_count}`, `{classes}`, `{methods}` and
/// `{time_range}`.
pub fn render_message(template: &str, commit: &PlannedCommit) -> String {
    let time_range = if commit.first_timestamp == commit.last_timestamp {
        format_time(commit.first_timestamp)
    } else {
        format!(
            "{}..{}",
            format_time(commit.first_timestamp),
            format_time(commit.last_timestamp)
        )
    };
    template
        .replace("{cluster_id}", &commit.cluster_id.to_string())
        .replace("{bead_count}", &commit.bead_ids.len().to_string())
        .replace("{classes}", &join_or_dash(&commit.classes))
        .replace("{methods}", &join_or_dash(&commit.methods))
        .replace("{time_range}", &time_range)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedRepo {
    pub base_commit: String,
    /// One commit per cluster, in plan order.
    pub commits: Vec<String>,
}

fn ensure_fresh(out: &Path) -> Result<(), ExportError> {
    let io = |source| ExportError::Io {
        path: out.to_path_buf(),
        source,
    };
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() || std::fs::read_dir(out).map_err(io)?.next().is_some() {
        return Err(ExportError::OutputExists(out.to_path_buf()));
    }
    Ok(())
}

/// Writes the plan as a new repository: a root commit holding the base,
/// then one commit per cluster.
pub fn export_git(plan: &ExportPlan, out: &Path, template: &str) -> Result<ExportedRepo, ExportError> {
    ensure_fresh(out)?;
    let states = plan.replay()?;
    let repo = Repo::init(out)?;
    let base_commit = repo.commit_snapshot(None, &states[0], "Base snapshot", plan.base_timestamp)?;
    let mut commits = Vec::with_capacity(plan.commits.len());
    for (commit, pair) in plan.commits.iter().zip(states.windows(2)) {
        let message = render_message(template, commit);
        commits.push(repo.commit_snapshot(Some(&pair[0]), &pair[1], &message, commit.timestamp)?);
    }
    Ok(ExportedRepo { base_commit, commits })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleHunk {
    pub file: String,
    #[serde(flatten)]
    pub hunk: WireHunk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleCommit {
    pub cluster_id: ClusterId,
    pub bead_ids: Vec<BeadId>,
    pub ts: i64,
    pub message: String,
    pub hunks: Vec<BundleHunk>,
}

/// Git-free form of an export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub version: u32,
    pub order: Vec<ClusterId>,
    pub commits: Vec<BundleCommit>,
}

impl ExportBundle {
    pub fn new(plan: &ExportPlan, template: &str) -> Self {
        ExportBundle {
            version: crate::ingest::changelog::VERSION,
            order: plan.order(),
            commits: plan
                .commits
                .iter()
                .map(|c| BundleCommit {
                    cluster_id: c.cluster_id,
                    bead_ids: c.bead_ids.clone(),
                    ts: c.timestamp,
                    message: render_message(template, c),
                    hunks: c
                        .hunks
                        .iter()
                        .map(|h| BundleHunk {
                            file: h.file.clone(),
                            hunk: WireHunk::from_hunk(h),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ExportError> {
        let json = serde_json::to_string_pretty(self).expect("bundle serializes");
        std::fs::write(path, json + "\n").map_err(|source| ExportError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
