//! The batch pipeline: ingest, squash unparseable beads, annotate, cluster.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ingest_path, IngestError, SourceFilter};
use crate::model::{ChangeBead, FineHistory, Origin, Partition};
use crate::preprocess::{squash_unparseable, PreprocessError, SquashReport};
use crate::structure::{annotate_beads, StructureError};
use crate::untangle::{initial_clusters, ConfigError, DistanceConfig};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
}

impl AnalysisError {
    /// Problems with what the user handed in, as opposed to failures while
    /// processing valid input.
    pub fn is_input_error(&self) -> bool {
        match self {
            AnalysisError::Ingest(e) => e.is_input_error(),
            AnalysisError::Config(_) | AnalysisError::Read { .. } => true,
            AnalysisError::Preprocess(_) | AnalysisError::Structure(_) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub config: DistanceConfig,
    /// Branch or revision to read from a Git input.
    pub branch: String,
    pub filter: SourceFilter,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            config: DistanceConfig::default(),
            branch: "HEAD".to_string(),
            filter: SourceFilter::default(),
        }
    }
}

/// Result of the batch pipeline. `history` is the preprocessed and
/// annotated history that the partition refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub history: FineHistory,
    pub partition: Partition,
    pub squash_report: SquashReport,
    pub config: DistanceConfig,
}

pub fn analyze_history(history: &FineHistory, config: &DistanceConfig) -> Result<Analysis, AnalysisError> {
    config.validate()?;
    let (cleaned, squash_report) = squash_unparseable(history)?;
    let annotated = annotate_beads(&cleaned)?;
    let partition = initial_clusters(&annotated, config);
    Ok(Analysis {
        history: annotated,
        partition,
        squash_report,
        config: *config,
    })
}

pub fn analyze_path(input: &Path, options: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let history = ingest_path(input, &options.branch, &options.filter)?;
    analyze_history(&history, &options.config)
}

/// Serialized form of an [`Analysis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFile {
    pub origin: Origin,
    pub beads: Vec<ChangeBead>,
    pub partition: Partition,
    pub squash_report: SquashReport,
    pub config: DistanceConfig,
}

impl From<&Analysis> for AnalysisFile {
    fn from(a: &Analysis) -> Self {
        AnalysisFile {
            origin: a.history.origin.clone(),
            beads: a.history.beads.clone(),
            partition: a.partition.clone(),
            squash_report: a.squash_report.clone(),
            config: a.config,
        }
    }
}

#[derive(Deserialize)]
struct WithPartition {
    partition: Partition,
}

/// Reads a partition from an analysis file, a saved session, or a bare
/// `{"clusters": [...]}` document.
pub fn read_partition(path: &Path) -> Result<Partition, AnalysisError> {
    let read_err = |reason: String| AnalysisError::Read {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?;
    let parsed = if value.get("partition").is_some() {
        serde_json::from_value::<WithPartition>(value).map(|w| w.partition)
    } else {
        serde_json::from_value::<Partition>(value)
    };
    parsed.map_err(|e| read_err(e.to_string()))
}

pub fn read_config(path: &Path) -> Result<DistanceConfig, AnalysisError> {
    let text = std::fs::read_to_string(path).map_err(|e| AnalysisError::Read {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(DistanceConfig::from_json(&text)?)
}
