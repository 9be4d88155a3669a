//! Pairwise bead distances and the initial threshold clustering.
//!
//! The distance is a weighted sum of four metrics: seconds between two
//! beads, number of beads between them, and whether they share a class or
//! a method. The two temporal metrics are divided by a saturation cap so
//! every term lies in `[0, 1]`. Beads closer than `theta` are linked and
//! the clusters are the connected components of that graph.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChangeBead, Cluster, ClusterId, FineHistory, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub alpha_time: f64,
    pub alpha_entries: f64,
    pub alpha_same_class: f64,
    pub alpha_same_method: f64,
    /// Seconds at which the time metric saturates.
    pub time_cap: f64,
    /// Intervening-bead count at which the entries metric saturates.
    pub entries_cap: f64,
    pub theta: f64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            alpha_time: 1.0,
            alpha_entries: 0.2,
            alpha_same_class: -0.2,
            alpha_same_method: -0.4,
            time_cap: 300.0,
            entries_cap: 20.0,
            theta: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be finite and positive")]
    NonPositiveCap(&'static str),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("cannot read config: {0}")]
    Read(String),
}

impl DistanceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("time_cap", self.time_cap), ("entries_cap", self.entries_cap)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::NonPositiveCap(name));
            }
        }
        for (name, v) in [
            ("alpha_time", self.alpha_time),
            ("alpha_entries", self.alpha_entries),
            ("alpha_same_class", self.alpha_same_class),
            ("alpha_same_method", self.alpha_same_method),
            ("theta", self.theta),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::NonFinite(name));
            }
        }
        Ok(())
    }

    /// Parses a JSON config; missing fields take their defaults.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: DistanceConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Read(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn time_distance(a: &ChangeBead, b: &ChangeBead) -> u64 {
    a.timestamp.abs_diff(b.timestamp)
}

pub fn number_of_entries_distance(a: &ChangeBead, b: &ChangeBead) -> usize {
    a.seq.abs_diff(b.seq).saturating_sub(1)
}

pub fn same_class(a: &ChangeBead, b: &ChangeBead) -> u8 {
    match (&a.enclosing_class, &b.enclosing_class) {
        (Some(x), Some(y)) if x == y => 1,
        _ => 0,
    }
}

pub fn same_method(a: &ChangeBead, b: &ChangeBead) -> u8 {
    match (&a.enclosing_method, &b.enclosing_method) {
        (Some(x), Some(y)) if x == y => 1,
        _ => 0,
    }
}

pub fn distance(a: &ChangeBead, b: &ChangeBead, cfg: &DistanceConfig) -> f64 {
    let time = (time_distance(a, b) as f64).min(cfg.time_cap) / cfg.time_cap;
    let entries = (number_of_entries_distance(a, b) as f64).min(cfg.entries_cap) / cfg.entries_cap;
    cfg.alpha_time * time
        + cfg.alpha_entries * entries
        + cfg.alpha_same_class * f64::from(same_class(a, b))
        + cfg.alpha_same_method * f64::from(same_method(a, b))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Keep the smaller index as root so components are labeled by their
        // earliest bead.
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the graph linking every pair with
/// `distance < theta`. Clusters are ordered by earliest bead and numbered
/// from 1 in that order.
pub fn initial_clusters(history: &FineHistory, cfg: &DistanceConfig) -> Partition {
    let beads = &history.beads;
    let mut sets = DisjointSet::new(beads.len());
    for i in 0..beads.len() {
        for j in i + 1..beads.len() {
            if distance(&beads[i], &beads[j], cfg) < cfg.theta {
                sets.union(i, j);
            }
        }
    }

    let mut roots: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..beads.len() {
        let root = sets.find(i);
        match roots.iter().position(|&r| r == root) {
            Some(k) => members[k].push(i),
            None => {
                roots.push(root);
                members.push(vec![i]);
            }
        }
    }

    let clusters = members
        .into_iter()
        .enumerate()
        .map(|(k, idx)| {
            Cluster::new(
                ClusterId(k as u32 + 1),
                idx.into_iter().map(|i| beads[i].id.clone()).collect(),
            )
        })
        .collect();
    Partition::new(clusters)
}
