//! Ready-made histories for examples, tests and demos.
//!
//! `fig1` is a small state machine edited for four unrelated reasons in
//! eight steps: logging, an argument-order fix, and two renames.

use crate::ingest::write_change_log;
use crate::model::{ChangeBead, FineHistory, Hunk, Origin, Snapshot};

pub const FIG1_FILE: &str = "fsm/StateMachine.java";
pub const FIG1_BASE_TIME: i64 = 1_577_836_800;

const FIG1_BEFORE: &str = "\
package fsm;

public class StateMachine {
    private int state;

    int foo(int input) {
        if (input > 0) {
            state = bar(input, state);
        }
        return bar(0, state);
    }

    int bar(int current, int input) {
        return (current + input) % 4;
    }

    public void run(int input) {
        state = foo(input);
    }
}
";

const FIG1_AFTER: &str = "\
package fsm;

public class StateMachine {
    private int state;

    int transit(int input) {
        System.out.println(\"state: \" + state);
        if (input > 0) {
            state = nextState(state, input);
            System.out.println(\"state: \" + state);
        }
        return nextState(state, 0);
    }

    int nextState(int current, int input) {
        return (current + input) % 4;
    }

    public void run(int input) {
        state = transit(input);
    }
}
";

/// Initial clusters expected under the default configuration, by bead id.
pub const FIG1_INITIAL: &[&[&str]] = &[&["1"], &["2", "3", "4"], &["5", "6"], &["7", "8"]];

/// Clusters after the user has fixed the mistakes of the initial clustering.
pub const FIG1_TAILORED: &[&[&str]] = &[&["1", "2"], &["3", "4"], &["5", "7"], &["6", "8"]];

pub fn fig1_before() -> Snapshot {
    Snapshot::from_files([(FIG1_FILE, FIG1_BEFORE)])
}

pub fn fig1_after() -> Snapshot {
    Snapshot::from_files([(FIG1_FILE, FIG1_AFTER)])
}

fn line(text: &str) -> String {
    format!("{text}\n")
}

fn replace(start: usize, old: &str, new: &str) -> Hunk {
    Hunk::new(FIG1_FILE, start, vec![line(old)], vec![line(new)])
}

fn insert(start: usize, text: &str) -> Hunk {
    Hunk::new(FIG1_FILE, start, vec![], vec![line(text)])
}

/// The eight-step history, unannotated.
pub fn fig1_history() -> FineHistory {
    let log_outer = "        System.out.println(\"state: \" + state);";
    let log_inner = "            System.out.println(\"state: \" + state);";
    let steps: Vec<(i64, Vec<Hunk>)> = vec![
        (0, vec![insert(7, log_outer)]),
        (600, vec![insert(10, log_inner)]),
        (
            620,
            vec![replace(9, "            state = bar(input, state);", "            state = bar(state, input);")],
        ),
        (640, vec![replace(12, "        return bar(0, state);", "        return bar(state, 0);")]),
        (1240, vec![replace(6, "    int foo(int input) {", "    int transit(int input) {")]),
        (
            1270,
            vec![replace(
                15,
                "    int bar(int current, int input) {",
                "    int nextState(int current, int input) {",
            )],
        ),
        (1870, vec![replace(20, "        state = foo(input);", "        state = transit(input);")]),
        (
            1900,
            vec![
                replace(
                    9,
                    "            state = bar(state, input);",
                    "            state = nextState(state, input);",
                ),
                replace(12, "        return bar(state, 0);", "        return nextState(state, 0);"),
            ],
        ),
    ];
    let beads = steps
        .into_iter()
        .enumerate()
        .map(|(seq, (offset, hunks))| {
            ChangeBead::new((seq + 1).to_string(), seq, FIG1_BASE_TIME + offset, hunks)
        })
        .collect();
    FineHistory::new(fig1_before(), beads, Origin::in_memory("fig1"))
}

/// The history as a change log with the final snapshot embedded.
pub fn fig1_change_log() -> String {
    write_change_log(&fig1_history(), true).expect("fig1 beads are single-file")
}

/// Two clusters that each delete a line the other inserted, in two files.
pub fn cyclic_history() -> (FineHistory, Vec<Vec<&'static str>>) {
    let base = Snapshot::from_files([
        ("p/A.java", "class A {\n}\n"),
        ("p/B.java", "class B {\n}\n"),
    ]);
    let beads = vec![
        ChangeBead::new("1", 0, 0, vec![Hunk::new("p/A.java", 2, vec![], vec![line("  int a;")])]),
        ChangeBead::new("2", 1, 10, vec![Hunk::new("p/B.java", 2, vec![], vec![line("  int b;")])]),
        ChangeBead::new("3", 2, 20, vec![Hunk::new("p/B.java", 2, vec![line("  int b;")], vec![])]),
        ChangeBead::new("4", 3, 30, vec![Hunk::new("p/A.java", 2, vec![line("  int a;")], vec![])]),
    ];
    (
        FineHistory::new(base, beads, Origin::in_memory("cyclic")),
        vec![vec!["1", "3"], vec!["2", "4"]],
    )
}
