//! Thin wrapper over the `git` command line.

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thiserror::Error;

use crate::model::Snapshot;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("failed to run git: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("git {args} failed: {stderr}")]
    Command { args: String, stderr: String },
    #[error("{path} in {rev} is not valid UTF-8")]
    NonUtf8 { rev: String, path: String },
}

/// Identity used for every commit written by this crate.
pub const COMMITTER_NAME: &str = "cbt";
pub const COMMITTER_EMAIL: &str = "cbt@localhost";

#[derive(Debug, Clone)]
pub struct Repo {
    path: PathBuf,
}

impl Repo {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        Repo { path: path.into() }
    }

    /// Runs `git init` with `main` as the initial branch.
    pub fn init(path: impl Into<PathBuf>) -> Result<Self, GitError> {
        let repo = Repo::open(path);
        std::fs::create_dir_all(&repo.path)?;
        repo.run(["init", "-q", "-b", "main"])?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn command<I, S>(&self, args: I) -> Command
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(&self.path)
            .args(["-c", "core.autocrlf=false", "-c", "commit.gpgsign=false"])
            .args(args)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_TERMINAL_PROMPT", "0");
        cmd
    }

    fn check(args: String, output: Output) -> Result<Vec<u8>, GitError> {
        if output.status.success() {
            Ok(output.stdout)
        } else {
            Err(GitError::Command {
                args,
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            })
        }
    }

    pub fn run<I, S>(&self, args: I) -> Result<Vec<u8>, GitError>
    where
        I: IntoIterator<Item = S> + Clone,
        S: AsRef<OsStr>,
    {
        let shown = args
            .clone()
            .into_iter()
            .map(|a| a.as_ref().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join(" ");
        let output = self.command(args).output()?;
        Self::check(shown, output)
    }

    pub fn run_text<I, S>(&self, args: I) -> Result<String, GitError>
    where
        I: IntoIterator<Item = S> + Clone,
        S: AsRef<OsStr>,
    {
        Ok(String::from_utf8_lossy(&self.run(args)?).into_owned())
    }

    pub fn is_repository(&self) -> bool {
        self.run(["rev-parse", "--git-dir"]).is_ok()
    }

    /// Reads every file of a commit accepted by `keep`.
    pub fn read_tree(&self, rev: &str, keep: impl Fn(&str) -> bool) -> Result<Snapshot, GitError> {
        let listing = self.run(["ls-tree", "-r", "-z", "--name-only", rev])?;
        let mut files = Vec::new();
        for raw in listing.split(|&b| b == 0).filter(|p| !p.is_empty()) {
            let path = String::from_utf8_lossy(raw).into_owned();
            if !keep(&path) {
                continue;
            }
            let text = self.read_file(rev, &path)?.unwrap_or_default();
            files.push((path, text));
        }
        Ok(Snapshot::from_files(files))
    }

    /// Contents of `path` at `rev`, or `None` if absent there.
    pub fn read_file(&self, rev: &str, path: &str) -> Result<Option<String>, GitError> {
        let spec = format!("{rev}:{path}");
        let output = self.command(["cat-file", "blob", spec.as_str()]).output()?;
        if !output.status.success() {
            return Ok(None);
        }
        String::from_utf8(output.stdout)
            .map(Some)
            .map_err(|_| GitError::NonUtf8 {
                rev: rev.to_string(),
                path: path.to_string(),
            })
    }

    /// Replaces the work tree with `snapshot` and commits everything.
    /// Returns the new commit id.
    pub fn commit_snapshot(
        &self,
        previous: Option<&Snapshot>,
        snapshot: &Snapshot,
        message: &str,
        timestamp: i64,
    ) -> Result<String, GitError> {
        if let Some(prev) = previous {
            for path in prev.paths().filter(|p| snapshot.get(p).is_none()) {
                let full = self.path.join(path);
                if full.exists() {
                    std::fs::remove_file(full)?;
                }
            }
        }
        for (path, text) in &snapshot.files {
            let full = self.path.join(path);
            if let Some(dir) = full.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(full, text)?;
        }
        self.run(["add", "-A"])?;
        let date = format!("@{timestamp} +0000");
        let mut cmd = self.command(["commit", "-q", "--allow-empty", "--no-verify", "-m", message]);
        cmd.env("GIT_AUTHOR_NAME", COMMITTER_NAME)
            .env("GIT_AUTHOR_EMAIL", COMMITTER_EMAIL)
            .env("GIT_COMMITTER_NAME", COMMITTER_NAME)
            .env("GIT_COMMITTER_EMAIL", COMMITTER_EMAIL)
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date);
        Self::check("commit".into(), cmd.output()?)?;
        Ok(self.run_text(["rev-parse", "HEAD"])?.trim().to_string())
    }
}
