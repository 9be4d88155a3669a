//! Serves a tailoring session on the sample history.
//!
//! cargo run --example serve_fig1 [-- PORT]
//! curl localhost:7413/api/session

use cbt_core::analysis::analyze_history;
use cbt_core::fixtures::fig1_history;
use cbt_core::service::{bind, serve, AppState, DEFAULT_PORT};
use cbt_core::{ClusterSession, DistanceConfig};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let port = match std::env::args().nth(1) {
        Some(p) => p.parse()?,
        None => DEFAULT_PORT,
    };
    let analysis = analyze_history(&fig1_history(), &DistanceConfig::default())?;
    let state = AppState::new(ClusterSession::new(analysis.history, analysis.partition)?);
    let listener = bind(port).await?;
    println!("listening on http://{}", listener.local_addr()?);
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
