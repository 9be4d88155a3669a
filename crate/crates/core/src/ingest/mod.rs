//! Loading fine-grained histories from Git repositories and Change-Log files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::git::GitError;
use crate::model::{FineHistory, HistoryError};

pub mod changelog;
pub mod git;

pub use changelog::{ingest_change_log, parse_change_log, write_change_log};
pub use git::ingest_git;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("change log line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("invalid history: {0}")]
    Replay(#[from] HistoryError),
    #[error("replayed history does not match the expected final text of {0}")]
    FinalMismatch(String),
    #[error("{0} is not a git repository")]
    NotARepository(PathBuf),
    #[error("history is not linear at commit {0}")]
    NonLinearHistory(String),
    #[error("commit {0} touches more than one source file")]
    MultiFileCommit(String),
    #[error("history contains no source changes")]
    EmptyHistory,
    #[error("bead {0} touches more than one file and cannot be written as a change-log record")]
    MultiFileBead(String),
    #[error(transparent)]
    Git(#[from] GitError),
}

impl IngestError {
    /// Errors caused by the input itself rather than by processing it.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, IngestError::MultiFileBead(_))
    }
}

/// Which paths are analyzable sources. Patterns are `*.ext` suffixes or
/// exact file names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFilter {
    pub patterns: Vec<String>,
}

impl Default for SourceFilter {
    fn default() -> Self {
        SourceFilter {
            patterns: vec!["*.java".to_string()],
        }
    }
}

impl SourceFilter {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(patterns: I) -> Self {
        SourceFilter {
            patterns: patterns.into_iter().map(Into::into).collect(),
        }
    }

    /// Accepts every path.
    pub fn any() -> Self {
        SourceFilter::new(["*"])
    }

    pub fn matches(&self, path: &str) -> bool {
        let name = path.rsplit('/').next().unwrap_or(path);
        self.patterns.iter().any(|p| match p.strip_prefix('*') {
            Some(suffix) => name.ends_with(suffix),
            None => name == p,
        })
    }
}

/// Loads a history from a `.cbl` file or a Git repository directory.
pub fn ingest_path(
    path: &Path,
    branch: &str,
    filter: &SourceFilter,
) -> Result<FineHistory, IngestError> {
    if !path.exists() {
        return Err(IngestError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        });
    }
    if path.is_dir() {
        ingest_git(path, branch, filter)
    } else {
        ingest_change_log(path, filter)
    }
}
