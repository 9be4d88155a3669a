//! Random histories and partitions shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use cbt_core::export::{plan_export, ExportError};
use cbt_core::model::{split_lines, Partition};
use cbt_core::{BeadId, ChangeBead, Cluster, ClusterId, DistanceConfig, FineHistory, Hunk, Origin, Snapshot};
use rand::rngs::StdRng;
use rand::Rng;

pub fn bead_ids(ids: &[&str]) -> Vec<BeadId> {
    ids.iter().map(|s| BeadId::from(*s)).collect()
}

pub fn partition_of(groups: &[&[&str]]) -> Partition {
    Partition::new(
        groups
            .iter()
            .enumerate()
            .map(|(i, g)| Cluster::new(ClusterId(i as u32 + 1), bead_ids(g)))
            .collect(),
    )
}

pub fn sets_of(groups: &[&[&str]]) -> Vec<Vec<BeadId>> {
    partition_of(groups).as_sets()
}

/// Beads with random timestamps and annotations; hunks are placeholders.
pub fn random_annotated_beads(rng: &mut StdRng, max_beads: usize) -> FineHistory {
    let n = rng.gen_range(1..=max_beads);
    let classes = ["p.A", "p.B", "p.A.Inner"];
    let methods = ["m()", "n(int)", "o(String)"];
    let mut t = rng.gen_range(0..1_000_000i64);
    let beads = (0..n)
        .map(|seq| {
            t += rng.gen_range(0..400);
            let mut b = ChangeBead::new(
                format!("b{seq}"),
                seq,
                t,
                vec![Hunk::new("A.java", 1, vec![], vec!["x\n".to_string()])],
            );
            if rng.gen_bool(0.8) {
                let class = classes[rng.gen_range(0..classes.len())];
                b.enclosing_class = Some(class.to_string());
                if rng.gen_bool(0.7) {
                    let m = methods[rng.gen_range(0..methods.len())];
                    b.enclosing_method = Some(format!("{class}.{m}"));
                }
            }
            b
        })
        .collect();
    FineHistory::new(Snapshot::default(), beads, Origin::in_memory("random"))
}

pub fn random_config(rng: &mut StdRng) -> DistanceConfig {
    DistanceConfig {
        alpha_time: rng.gen_range(-1.0..2.0),
        alpha_entries: rng.gen_range(-1.0..2.0),
        alpha_same_class: rng.gen_range(-1.0..1.0),
        alpha_same_method: rng.gen_range(-1.0..1.0),
        time_cap: rng.gen_range(1.0..1000.0),
        entries_cap: rng.gen_range(1.0..30.0),
        theta: rng.gen_range(-1.0..1.5),
    }
}

/// Source of globally unique line texts, so that every line of every
/// state identifies one insertion.
pub struct Lines(usize);

impl Lines {
    pub fn new() -> Self {
        Lines(0)
    }

    pub fn next(&mut self) -> String {
        self.0 += 1;
        format!("line {}\n", self.0)
    }

    pub fn many(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.next()).collect()
    }
}

/// A replayable history of random edits over up to three files, with
/// every line text unique across the whole history.
pub fn random_text_history(rng: &mut StdRng, max_beads: usize) -> FineHistory {
    let mut lines = Lines::new();
    let files = ["a/One.java", "a/Two.java", "b/Three.java"];
    let file_count = rng.gen_range(1..=files.len());
    let mut state: Vec<Vec<String>> = (0..file_count)
        .map(|_| lines.many(rng.gen_range(0..12)))
        .collect();
    let base = Snapshot::from_files(
        files
            .iter()
            .zip(&state)
            .map(|(f, l)| (f.to_string(), l.concat())),
    );

    let n = rng.gen_range(1..=max_beads);
    let mut t = 1_600_000_000i64;
    let mut beads = Vec::with_capacity(n);
    for seq in 0..n {
        let f = rng.gen_range(0..file_count);
        let current = &mut state[f];
        // One or two non-overlapping hunks in one file.
        let hunk_count = if current.len() >= 4 && rng.gen_bool(0.3) { 2 } else { 1 };
        let mut cuts: Vec<usize> = (0..hunk_count)
            .flat_map(|_| {
                let from = rng.gen_range(0..=current.len());
                let len = rng.gen_range(0..=2usize).min(current.len() - from);
                [from, from + len]
            })
            .collect();
        cuts.sort_unstable();
        let mut hunks = Vec::new();
        let mut next_state = Vec::new();
        let mut cursor = 0;
        for pair in cuts.chunks(2) {
            let (from, to) = (pair[0], pair[1]);
            // Keep a gap between hunks so their order is unambiguous.
            if !hunks.is_empty() && from <= cursor {
                continue;
            }
            let deleted: Vec<String> = current[from..to].to_vec();
            let mut inserted = lines.many(rng.gen_range(0..=3));
            if deleted.is_empty() && inserted.is_empty() {
                inserted.push(lines.next());
            }
            next_state.extend_from_slice(&current[cursor..from]);
            next_state.extend(inserted.iter().cloned());
            cursor = to;
            hunks.push(Hunk::new(files[f], from + 1, deleted, inserted));
        }
        next_state.extend_from_slice(&current[cursor..]);
        *current = next_state;
        t += rng.gen_range(0..600);
        beads.push(ChangeBead::new(format!("r{seq}"), seq, t, hunks));
    }
    FineHistory::new(base, beads, Origin::in_memory("random-text"))
}

/// Assigns beads to up to `k` random clusters, then repairs dependency
/// cycles until the partition can be exported: first by moving a
/// witnessing bead into the cluster it depends on, and after too many
/// moves by merging the clusters of a cycle.
pub fn random_acyclic_partition(rng: &mut StdRng, history: &FineHistory, k: usize) -> Partition {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k.max(1)];
    for i in 0..history.len() {
        let g = rng.gen_range(0..groups.len());
        groups[g].push(i);
    }
    groups.retain(|g| !g.is_empty());
    let seqs = history.seq_index();
    let mut moves = 0;
    loop {
        let partition = partition_from_groups(history, &groups);
        let (clusters, witnesses) = match plan_export(history, &partition) {
            Ok(_) => return partition,
            Err(ExportError::CyclicClusterDependency { clusters, witnesses }) => (clusters, witnesses),
            Err(other) => panic!("unexpected planning failure: {other}"),
        };
        let index = |c: ClusterId| c.0 as usize - 1;
        if moves < 4 * history.len() {
            moves += 1;
            let w = &witnesses[rng.gen_range(0..witnesses.len())];
            let bead = seqs[&w.bead];
            groups[index(w.cluster)].retain(|&s| s != bead);
            groups[index(w.depends_on)].push(bead);
            groups[index(w.depends_on)].sort_unstable();
        } else {
            let doomed: BTreeSet<usize> = clusters.iter().map(|&c| index(c)).collect();
            let mut merged = Vec::new();
            let mut rest = Vec::new();
            for (i, g) in std::mem::take(&mut groups).into_iter().enumerate() {
                if doomed.contains(&i) {
                    merged.extend(g);
                } else {
                    rest.push(g);
                }
            }
            merged.sort_unstable();
            rest.push(merged);
            groups = rest;
        }
        groups.retain(|g| !g.is_empty());
    }
}

/// Cluster ids are `index + 1` in `groups` order.
pub fn partition_from_groups(history: &FineHistory, groups: &[Vec<usize>]) -> Partition {
    let mut partition = Partition::new(
        groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                Cluster::new(
                    ClusterId(i as u32 + 1),
                    g.iter().map(|&s| history.beads[s].id.clone()).collect(),
                )
            })
            .collect(),
    );
    partition.normalize(&history.seq_index());
    partition
}

/// Longest common subsequence length by dynamic programming.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

struct JavaFile {
    path: String,
    header: Vec<String>,
    members: Vec<Vec<String>>,
    /// Member index of an unclosed method body or comment, and its closer.
    open: Option<(usize, &'static str)>,
}

impl JavaFile {
    fn text(&self) -> String {
        let mut out = self.header.concat();
        for m in &self.members {
            out.push_str(&m.concat());
        }
        out.push_str("}\n");
        out
    }

    /// 1-based line where member `i` starts (or would start).
    fn line_of(&self, i: usize) -> usize {
        self.header.len() + self.members[..i].iter().map(Vec::len).sum::<usize>() + 1
    }
}

/// Java histories in which some runs of beads leave a file unbalanced (an
/// unfinished method body or block comment) until a later bead closes it.
/// Every window is closed by the end, so the final snapshot parses.
pub fn random_java_history_with_windows(rng: &mut StdRng, max_beads: usize) -> FineHistory {
    let file_count = rng.gen_range(1..=2);
    let mut files: Vec<JavaFile> = (0..file_count)
        .map(|i| JavaFile {
            path: format!("p/F{i}.java"),
            header: vec!["package p;\n".into(), format!("class F{i} {{\n")],
            members: (0..rng.gen_range(0..3)).map(|k| vec![format!("  int base{k};\n")]).collect(),
            open: None,
        })
        .collect();
    let base = Snapshot::from_files(files.iter().map(|f| (f.path.clone(), f.text())));

    let target = rng.gen_range(1..=max_beads);
    let mut beads: Vec<ChangeBead> = Vec::new();
    let mut t = 1_700_000_000i64;
    let mut counter = 0usize;
    loop {
        let closing_time = beads.len() >= target;
        if closing_time && files.iter().all(|f| f.open.is_none()) {
            break;
        }
        let fi = if closing_time {
            files.iter().position(|f| f.open.is_some()).expect("some window open")
        } else {
            rng.gen_range(0..files.len())
        };
        let f = &mut files[fi];
        counter += 1;
        let hunk = match f.open {
            Some((m, closer)) if closing_time || rng.gen_bool(0.4) => {
                let at = f.line_of(m) + f.members[m].len();
                f.members[m].push(format!("{closer}\n"));
                f.open = None;
                Hunk::new(&f.path, at, vec![], vec![format!("{closer}\n")])
            }
            Some((m, closer)) if rng.gen_bool(0.5) => {
                // Braces inside a comment do not count.
                let text = if closer == "  */" {
                    format!("   text {counter} {{\n")
                } else {
                    format!("    s{counter}();\n")
                };
                let at = f.line_of(m) + f.members[m].len();
                f.members[m].push(text.clone());
                Hunk::new(&f.path, at, vec![], vec![text])
            }
            _ => {
                let choice = rng.gen_range(0..10);
                let fields: Vec<usize> = (0..f.members.len())
                    .filter(|&i| f.members[i].len() == 1 && f.open.is_none_or(|(m, _)| m != i))
                    .collect();
                if choice < 3 && f.open.is_none() {
                    let m = rng.gen_range(0..=f.members.len());
                    let (opener, closer) = if rng.gen_bool(0.5) {
                        (format!("  void m{counter}() {{\n"), "  }")
                    } else {
                        (format!("  /* note {counter} {{\n"), "  */")
                    };
                    let at = f.line_of(m);
                    f.members.insert(m, vec![opener.clone()]);
                    f.open = Some((m, closer));
                    Hunk::new(&f.path, at, vec![], vec![opener])
                } else if choice < 5 && !fields.is_empty() {
                    let m = fields[rng.gen_range(0..fields.len())];
                    let old = f.members[m][0].clone();
                    let new = format!("  long f{counter};\n");
                    f.members[m][0] = new.clone();
                    Hunk::new(&f.path, f.line_of(m), vec![old], vec![new])
                } else if choice < 6 && !fields.is_empty() {
                    let m = fields[rng.gen_range(0..fields.len())];
                    let at = f.line_of(m);
                    let old = f.members.remove(m);
                    if let Some((open, closer)) = f.open {
                        if open > m {
                            f.open = Some((open - 1, closer));
                        }
                    }
                    Hunk::new(&f.path, at, old, vec![])
                } else {
                    let m = rng.gen_range(0..=f.members.len());
                    let text = format!("  int f{counter};\n");
                    let at = f.line_of(m);
                    f.members.insert(m, vec![text.clone()]);
                    if let Some((open, closer)) = f.open {
                        if open >= m {
                            f.open = Some((open + 1, closer));
                        }
                    }
                    Hunk::new(&f.path, at, vec![], vec![text])
                }
            }
        };
        t += rng.gen_range(1..120);
        let seq = beads.len();
        beads.push(ChangeBead::new(format!("j{seq}"), seq, t, vec![hunk]));
    }
    FineHistory::new(base, beads, Origin::in_memory("random-java"))
}

/// For each line text (unique in these histories), the bead that inserted
/// it and the bead that deleted it, from plain replay.
pub fn line_provenance(history: &FineHistory) -> (HashMap<String, usize>, HashMap<String, usize>) {
    let states = history.replay().unwrap();
    let lines = |s: &Snapshot| -> BTreeSet<String> {
        s.files.values().flat_map(|t| split_lines(t)).map(str::to_string).collect()
    };
    let (mut born, mut killed) = (HashMap::new(), HashMap::new());
    for (i, pair) in states.windows(2).enumerate() {
        let (a, b) = (lines(&pair[0]), lines(&pair[1]));
        for l in b.difference(&a) {
            born.insert(l.clone(), i);
        }
        for l in a.difference(&b) {
            killed.insert(l.clone(), i);
        }
    }
    (born, killed)
}
