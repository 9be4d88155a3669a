//! Fixes the initial clustering of the sample history by splitting and
//! merging, and shows the attributed diff of two clusters.
//!
//! cargo run --example tailor_session

use cbt_core::analysis::analyze_history;
use cbt_core::fixtures::fig1_history;
use cbt_core::weave::LineKind;
use cbt_core::{BeadId, ClusterId, ClusterSession, DistanceConfig, Partition};

fn print(partition: &Partition) {
    let sets: Vec<String> = partition
        .clusters
        .iter()
        .map(|c| {
            let ids: Vec<&str> = c.bead_ids.iter().map(|b| b.as_str()).collect();
            format!("{}:{{{}}}", c.id, ids.join(","))
        })
        .collect();
    println!("{}", sets.join(" "));
}

fn cluster_of(s: &ClusterSession, bead: &str) -> ClusterId {
    s.partition().cluster_of(&BeadId::from(bead)).expect("known bead")
}

fn main() -> anyhow::Result<()> {
    let analysis = analyze_history(&fig1_history(), &DistanceConfig::default())?;
    let mut s = ClusterSession::new(analysis.history, analysis.partition)?;
    print(s.partition());

    s.split_cluster(cluster_of(&s, "2"), &["2".into()])?;
    s.merge_clusters(&[cluster_of(&s, "1"), cluster_of(&s, "2")])?;
    s.split_cluster(cluster_of(&s, "6"), &["6".into()])?;
    s.split_cluster(cluster_of(&s, "8"), &["8".into()])?;
    s.merge_clusters(&[cluster_of(&s, "5"), cluster_of(&s, "7")])?;
    s.merge_clusters(&[cluster_of(&s, "6"), cluster_of(&s, "8")])?;
    print(s.partition());

    let selected = [cluster_of(&s, "1"), cluster_of(&s, "3")];
    let diff = s.augmented_diff(&selected, Some(1))?;
    for line in &diff.lines {
        let mark = match line.kind {
            LineKind::Context => ' ',
            LineKind::Added => '+',
            LineKind::Removed => '-',
        };
        let owner = line.owner.map(|c| format!("[{}]", c)).unwrap_or_default();
        println!("{owner:>4} {mark}{}", line.text);
    }

    println!();
    for p in s.project_beads() {
        println!("bead {} x={} lane={} cluster={} {}", p.bead_id, p.x, p.y, p.cluster_id, p.label);
    }

    s.undo()?;
    print(s.partition());
    s.redo()?;
    Ok(())
}
