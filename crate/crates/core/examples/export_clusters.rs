//! Exports the tailored clusters of the sample history as a new
//! repository, one commit per cluster.
//!
//! cargo run --example export_clusters [-- OUT_DIR]

use std::path::PathBuf;

use cbt_core::analysis::analyze_history;
use cbt_core::export::{export_git, plan_export, ExportBundle, DEFAULT_MESSAGE_TEMPLATE};
use cbt_core::fixtures::{fig1_after, fig1_history, FIG1_TAILORED};
use cbt_core::git::Repo;
use cbt_core::{Cluster, ClusterId, DistanceConfig, Partition};

fn main() -> anyhow::Result<()> {
    let analysis = analyze_history(&fig1_history(), &DistanceConfig::default())?;
    let partition = Partition::new(
        FIG1_TAILORED
            .iter()
            .enumerate()
            .map(|(i, ids)| Cluster::new(ClusterId(i as u32 + 1), ids.iter().map(|&b| b.into()).collect()))
            .collect(),
    );
    let plan = plan_export(&analysis.history, &partition)?;

    let tmp = tempfile::tempdir()?;
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| tmp.path().join("untangled"));
    let exported = export_git(&plan, &out, DEFAULT_MESSAGE_TEMPLATE)?;
    let bundle = out.with_extension("export.json");
    ExportBundle::new(&plan, DEFAULT_MESSAGE_TEMPLATE).write(&bundle)?;

    let repo = Repo::open(&out);
    print!("{}", repo.run_text(["log", "--reverse", "--stat", "--format=%n%h %ad%n%B", "--date=iso-strict"])?);
    assert_eq!(repo.read_tree("HEAD", |_| true)?, fig1_after());
    println!("{} cluster commits, bundle at {}", exported.commits.len(), bundle.display());
    Ok(())
}
