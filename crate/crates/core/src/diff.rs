//! Minimal line-level diffs between two texts, expressed as [`Hunk`]s.

use std::collections::BTreeSet;

use similar::{capture_diff_slices, Algorithm, DiffOp};

use crate::model::{split_lines, Hunk, Snapshot};

/// Diffs two versions of one file. Changes separated by at least one
/// unchanged line become separate hunks; starts refer to `before`.
pub fn diff_texts(file: &str, before: &str, after: &str) -> Vec<Hunk> {
    let old = split_lines(before);
    let new = split_lines(after);
    let ops = capture_diff_slices(Algorithm::Myers, &old, &new);

    // Positions come from walking op lengths; the indices carried by
    // non-equal ops are not always consistent with the preceding ops.
    let mut hunks = Vec::new();
    let mut current: Option<Hunk> = None;
    let (mut o, mut n) = (0usize, 0usize);
    for op in ops {
        let (old_len, new_len) = match op {
            DiffOp::Equal { len, .. } => (len, len),
            DiffOp::Delete { old_len, .. } => (old_len, 0),
            DiffOp::Insert { new_len, .. } => (0, new_len),
            DiffOp::Replace { old_len, new_len, .. } => (old_len, new_len),
        };
        if let DiffOp::Equal { .. } = op {
            hunks.extend(current.take());
        } else {
            let h = current.get_or_insert_with(|| Hunk::new(file, o + 1, vec![], vec![]));
            h.deleted.extend(old[o..o + old_len].iter().map(|s| s.to_string()));
            h.inserted.extend(new[n..n + new_len].iter().map(|s| s.to_string()));
        }
        o += old_len;
        n += new_len;
    }
    hunks.extend(current);
    hunks
}

/// Diffs every file present in either snapshot, in path order.
pub fn diff_snapshots(before: &Snapshot, after: &Snapshot) -> Vec<Hunk> {
    let paths: BTreeSet<&str> = before.paths().chain(after.paths()).collect();
    paths
        .into_iter()
        .flat_map(|p| diff_texts(p, before.get(p).unwrap_or(""), after.get(p).unwrap_or("")))
        .collect()
}
