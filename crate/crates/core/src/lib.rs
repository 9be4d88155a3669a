//! Untangling fine-grained edit histories into clustered commits.
//!
//! A history of small edits (a [`model::FineHistory`]) is ingested from a
//! Git repository or a change-log file, cleaned of edits that leave the
//! source unparseable, annotated with enclosing classes and methods, and
//! grouped into clusters. A [`session::ClusterSession`] lets a user split
//! and merge clusters; [`export`] turns the final partition into commits.

pub mod analysis;
pub mod diff;
pub mod export;
pub mod fixtures;
pub mod git;
pub mod ingest;
pub mod model;
pub mod preprocess;
pub mod service;
pub mod session;
pub mod structure;
pub mod untangle;
pub mod weave;

pub use model::{
    BeadId, ChangeBead, Cluster, ClusterId, FineHistory, Hunk, Origin, Partition, Snapshot,
};
pub use session::ClusterSession;
pub use untangle::{initial_clusters, DistanceConfig};
