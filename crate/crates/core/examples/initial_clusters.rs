//! Prints the pairwise distances of the sample history and the clusters
//! they produce.
//!
//! cargo run --example initial_clusters [-- THETA]

use cbt_core::analysis::analyze_history;
use cbt_core::fixtures::fig1_history;
use cbt_core::untangle::distance;
use cbt_core::DistanceConfig;

fn main() -> anyhow::Result<()> {
    let mut config = DistanceConfig::default();
    if let Some(theta) = std::env::args().nth(1) {
        config.theta = theta.parse()?;
    }
    let analysis = analyze_history(&fig1_history(), &config)?;
    let beads = &analysis.history.beads;

    print!("     ");
    for b in beads {
        print!("{:>7}", b.id);
    }
    println!();
    for a in beads {
        print!("{:>5}", a.id);
        for b in beads {
            print!("{:>7.3}", distance(a, b, &config));
        }
        println!("   {}", a.enclosing_method.as_deref().unwrap_or("-"));
    }
    println!("\ntheta = {}", config.theta);
    for cluster in &analysis.partition.clusters {
        let ids: Vec<&str> = cluster.bead_ids.iter().map(|b| b.as_str()).collect();
        println!("cluster {} {} {{{}}}", cluster.id, cluster.color, ids.join(", "));
    }
    Ok(())
}
