//! Linear Git histories of micro-commits.

use std::path::Path;

use super::{IngestError, SourceFilter};
use crate::diff::diff_texts;
use crate::git::Repo;
use crate::model::{ChangeBead, FineHistory, Origin, OriginFormat};

struct CommitInfo {
    id: String,
    parents: Vec<String>,
    committer_time: i64,
}

fn list_commits(repo: &Repo, branch: &str) -> Result<Vec<CommitInfo>, IngestError> {
    let log = repo.run_text(["log", "--reverse", "--format=%H%x1f%P%x1f%ct", branch])?;
    log.lines()
        .filter(|l| !l.is_empty())
        .map(|line| {
            let mut parts = line.split('\x1f');
            let id = parts.next().unwrap_or_default().to_string();
            let parents = parts
                .next()
                .unwrap_or_default()
                .split_whitespace()
                .map(str::to_string)
                .collect();
            let committer_time = parts
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| IngestError::NonLinearHistory(id.clone()))?;
            Ok(CommitInfo {
                id,
                parents,
                committer_time,
            })
        })
        .collect()
}

/// One bead per non-root commit that changes a source file; the root
/// commit's tree is the base.
pub fn ingest_git(
    repo_path: &Path,
    branch: &str,
    filter: &SourceFilter,
) -> Result<FineHistory, IngestError> {
    let repo = Repo::open(repo_path);
    if !repo.is_repository() {
        return Err(IngestError::NotARepository(repo_path.to_path_buf()));
    }
    let commits = list_commits(&repo, branch)?;
    let (root, rest) = commits.split_first().ok_or(IngestError::EmptyHistory)?;
    if !root.parents.is_empty() {
        return Err(IngestError::NonLinearHistory(root.id.clone()));
    }
    for pair in commits.windows(2) {
        if pair[1].parents != [pair[0].id.clone()] {
            return Err(IngestError::NonLinearHistory(pair[1].id.clone()));
        }
    }

    let base = repo.read_tree(&root.id, |p| filter.matches(p))?;
    let mut state = base.clone();
    let mut beads = Vec::new();
    for (parent, commit) in commits.iter().zip(rest) {
        let changed = repo.run([
            "diff-tree",
            "-r",
            "-z",
            "--no-commit-id",
            "--name-only",
            parent.id.as_str(),
            commit.id.as_str(),
        ])?;
        let sources: Vec<String> = changed
            .split(|&b| b == 0)
            .filter(|p| !p.is_empty())
            .map(|p| String::from_utf8_lossy(p).into_owned())
            .filter(|p| filter.matches(p))
            .collect();
        let path = match sources.as_slice() {
            [] => continue,
            [path] => path,
            _ => return Err(IngestError::MultiFileCommit(commit.id.clone())),
        };
        let after = repo.read_file(&commit.id, path)?.unwrap_or_default();
        let hunks = diff_texts(path, state.get(path).unwrap_or(""), &after);
        if hunks.is_empty() {
            continue;
        }
        state = state
            .apply(&hunks)
            .expect("hunks computed against the current state apply");
        beads.push(ChangeBead::new(
            commit.id.clone(),
            beads.len(),
            commit.committer_time,
            hunks,
        ));
    }
    if beads.is_empty() {
        return Err(IngestError::EmptyHistory);
    }

    let history = FineHistory::new(
        base,
        beads,
        Origin {
            source: repo_path.display().to_string(),
            format: OriginFormat::Git,
            commits: commits.iter().map(|c| c.id.clone()).collect(),
        },
    );
    history.check_beads()?;
    history.final_snapshot()?;
    Ok(history)
}

/// Writes a history as a linear repository: a root commit holding the base,
/// then one commit per bead. Used to build fixture repositories.
pub fn materialize_history(history: &FineHistory, out: &Path) -> Result<Vec<String>, IngestError> {
    let repo = Repo::init(out)?;
    let states = history.replay()?;
    let base_time = history.beads.first().map_or(0, |b| b.timestamp);
    let mut ids = vec![repo.commit_snapshot(None, &states[0], "base", base_time)?];
    for (bead, pair) in history.beads.iter().zip(states.windows(2)) {
        let message = format!("change {}", bead.id);
        ids.push(repo.commit_snapshot(Some(&pair[0]), &pair[1], &message, bead.timestamp)?);
    }
    Ok(ids)
}
