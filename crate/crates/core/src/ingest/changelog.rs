//! Change-Log v1 (`.cbl`): line-delimited JSON.
//!
//! Line 1 is `{"version":1,"base":{"<path>":"<text>",…}}`, optionally with a
//! `"final"` map of the same shape that replay must reproduce. Every further
//! line is one bead:
//! `{"seq":<int>,"ts":<int>,"file":"<path>","hunks":[{"start":<int>,"del":[…],"ins":[…]}]}`.
//! Hunk lines keep their `\n` terminators.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, SourceFilter};
use crate::model::{ChangeBead, FineHistory, Hunk, Origin, OriginFormat, Snapshot};

pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    base: BTreeMap<String, String>,
    #[serde(default, rename = "final", skip_serializing_if = "Option::is_none")]
    expected_final: Option<BTreeMap<String, String>>,
}

/// Hunk as stored on the wire; `file` lives on the enclosing record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireHunk {
    pub start: usize,
    pub del: Vec<String>,
    pub ins: Vec<String>,
}

impl WireHunk {
    pub fn from_hunk(h: &Hunk) -> Self {
        WireHunk {
            start: h.start,
            del: h.deleted.clone(),
            ins: h.inserted.clone(),
        }
    }

    pub fn into_hunk(self, file: &str) -> Hunk {
        Hunk::new(file, self.start, self.del, self.ins)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    seq: usize,
    ts: i64,
    file: String,
    hunks: Vec<WireHunk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

pub fn ingest_change_log(path: &Path, filter: &SourceFilter) -> Result<FineHistory, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut history = parse_change_log(&text, filter)?;
    history.origin.source = path.display().to_string();
    Ok(history)
}

/// Parses and replay-validates a change log.
pub fn parse_change_log(text: &str, filter: &SourceFilter) -> Result<FineHistory, IngestError> {
    let format_err = |line: usize, reason: String| IngestError::Format { line, reason };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, first) = lines
        .next()
        .ok_or_else(|| format_err(1, "missing header".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| format_err(1, format!("bad header: {e}")))?;
    if header.version != VERSION {
        return Err(format_err(1, format!("unsupported version {}", header.version)));
    }
    let base = Snapshot::from_files(header.base.into_iter().filter(|(p, _)| filter.matches(p)));

    let mut beads: Vec<ChangeBead> = Vec::new();
    let mut last_ts = i64::MIN;
    for (expected_seq, (line_no, line)) in lines.enumerate() {
        let record: Record =
            serde_json::from_str(line).map_err(|e| format_err(line_no, format!("bad record: {e}")))?;
        if record.seq != expected_seq {
            return Err(format_err(
                line_no,
                format!("seq {} out of order, expected {expected_seq}", record.seq),
            ));
        }
        if record.ts < last_ts {
            return Err(format_err(line_no, format!("timestamp {} goes backwards", record.ts)));
        }
        last_ts = record.ts;
        if record.hunks.is_empty() {
            return Err(format_err(line_no, "record has no hunks".into()));
        }
        for h in &record.hunks {
            if h.start == 0 {
                return Err(format_err(line_no, "hunk start must be at least 1".into()));
            }
            if h.del.is_empty() && h.ins.is_empty() {
                return Err(format_err(line_no, "hunk deletes and inserts nothing".into()));
            }
        }
        if !filter.matches(&record.file) {
            continue;
        }
        let id = record.id.unwrap_or_else(|| (record.seq + 1).to_string());
        let hunks = record
            .hunks
            .into_iter()
            .map(|h| h.into_hunk(&record.file))
            .collect();
        beads.push(ChangeBead::new(id, beads.len(), record.ts, hunks));
    }

    let history = FineHistory::new(
        base,
        beads,
        Origin {
            source: String::new(),
            format: OriginFormat::ChangeLog,
            commits: Vec::new(),
        },
    );
    history.check_beads()?;
    let last = history.final_snapshot()?;
    if let Some(expected) = header.expected_final {
        let expected = Snapshot::from_files(expected.into_iter().filter(|(p, _)| filter.matches(p)));
        let mismatch = expected
            .paths()
            .chain(last.paths())
            .find(|p| expected.get(p) != last.get(p))
            .map(str::to_string);
        if let Some(path) = mismatch {
            return Err(IngestError::FinalMismatch(path));
        }
    }
    Ok(history)
}

/// Serializes a history of single-file beads. With `with_final`, the final
/// snapshot is embedded for self-checking.
pub fn write_change_log(history: &FineHistory, with_final: bool) -> Result<String, IngestError> {
    let expected_final = if with_final {
        Some(history.final_snapshot()?.files)
    } else {
        None
    };
    let header = Header {
        version: VERSION,
        base: history.base.files.clone(),
        expected_final,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for bead in &history.beads {
        let files = bead.files();
        let [file] = files.as_slice() else {
            return Err(IngestError::MultiFileBead(bead.id.to_string()));
        };
        let default_id = (bead.seq + 1).to_string();
        let record = Record {
            seq: bead.seq,
            ts: bead.timestamp,
            file: file.to_string(),
            hunks: bead.hunks.iter().map(WireHunk::from_hunk).collect(),
            id: (bead.id.as_str() != default_id).then(|| bead.id.to_string()),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    Ok(out)
}
