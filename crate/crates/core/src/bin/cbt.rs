use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use cbt_core::analysis::{analyze_path, read_config, read_partition, AnalysisError, AnalysisFile, AnalysisOptions};
use cbt_core::export::{ExportError, DEFAULT_MESSAGE_TEMPLATE};
use cbt_core::ingest::SourceFilter;
use cbt_core::service::{self, AppState, ServeError, SessionSidecar, DEFAULT_PORT};
use cbt_core::{ClusterSession, DistanceConfig};

#[derive(Parser)]
#[command(name = "cbt", version, about = "Untangle fine-grained edit histories into clustered commits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a history and write the analysis as JSON.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file; stdout when omitted.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Serve the interactive tailoring API.
    Serve {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Directory with the UI's static files.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Ignore a saved session next to the input.
        #[arg(long)]
        fresh: bool,
    },
    /// Write one commit per cluster into a new repository.
    Export {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Analysis, saved session or partition JSON; defaults to the initial clusters.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_MESSAGE_TEMPLATE)]
        message_template: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// Where to write the export bundle; defaults to `<output>.export.json`.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Git repository directory or `.cbl` change log.
    input: PathBuf,
    /// Branch or revision of a Git input.
    #[arg(long, default_value = "HEAD")]
    branch: String,
    /// Source file patterns (`*.ext` or exact names).
    #[arg(long = "include", default_value = "*.java")]
    include: Vec<String>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_time: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_entries: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_same_class: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_same_method: Option<f64>,
    #[arg(long)]
    time_cap: Option<f64>,
    #[arg(long)]
    entries_cap: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<DistanceConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(path)?,
            None => DistanceConfig::default(),
        };
        let overrides = [
            (&mut cfg.theta, self.theta),
            (&mut cfg.alpha_time, self.alpha_time),
            (&mut cfg.alpha_entries, self.alpha_entries),
            (&mut cfg.alpha_same_class, self.alpha_same_class),
            (&mut cfg.alpha_same_method, self.alpha_same_method),
            (&mut cfg.time_cap, self.time_cap),
            (&mut cfg.entries_cap, self.entries_cap),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        cfg.validate().map_err(AnalysisError::from)?;
        Ok(cfg)
    }
}

fn options(input: &InputArgs, config: &ConfigArgs) -> Result<AnalysisOptions> {
    Ok(AnalysisOptions {
        config: config.resolve()?,
        branch: input.branch.clone(),
        filter: SourceFilter::new(input.include.clone()),
    })
}

fn analyze(input: &InputArgs, config: &ConfigArgs, output: Option<&Path>) -> Result<()> {
    let analysis = analyze_path(&input.input, &options(input, config)?)?;
    let json = serde_json::to_string_pretty(&AnalysisFile::from(&analysis))?;
    match output {
        Some(path) => {
            std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            eprintln!(
                "{} beads in {} clusters, {} squashes -> {}",
                analysis.history.len(),
                analysis.partition.len(),
                analysis.squash_report.entries.len(),
                path.display()
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn export(
    input: &InputArgs,
    config: &ConfigArgs,
    partition: Option<&Path>,
    template: &str,
    output: &Path,
    bundle: Option<&Path>,
) -> Result<()> {
    let analysis = analyze_path(&input.input, &options(input, config)?)?;
    let partition = match partition {
        Some(path) => read_partition(path)?,
        None => analysis.partition,
    };
    let default_bundle = PathBuf::from(format!("{}.export.json", output.display()));
    let bundle = bundle.unwrap_or(&default_bundle);
    let repo = service::export_session(&analysis.history, &partition, output, template, Some(bundle))?;
    println!("{}", repo.base_commit);
    for commit in &repo.commits {
        println!("{commit}");
    }
    eprintln!(
        "{} cluster commits in {}, bundle {}",
        repo.commits.len(),
        output.display(),
        bundle.display()
    );
    Ok(())
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!("cannot listen for ctrl-c: {e}");
        std::future::pending::<()>().await;
    }
}

fn serve(
    input: &InputArgs,
    config: &ConfigArgs,
    port: u16,
    assets: Option<PathBuf>,
    fresh: bool,
) -> Result<()> {
    let analysis = analyze_path(&input.input, &options(input, config)?)?;
    let sidecar_path = SessionSidecar::path_for(&input.input);
    let saved: Option<SessionSidecar> = if fresh || !sidecar_path.exists() {
        None
    } else {
        let text = std::fs::read_to_string(&sidecar_path)?;
        Some(serde_json::from_str(&text).with_context(|| format!("reading {}", sidecar_path.display()))?)
    };
    let state = match saved {
        Some(saved) => {
            let session = ClusterSession::restore(analysis.history, saved.partition, saved.next_cluster_id)
                .with_context(|| format!("saved session {} does not fit the input", sidecar_path.display()))?;
            tracing::info!("resumed session at revision {}", saved.revision);
            AppState::resume(session, saved.revision)
        }
        None => AppState::new(ClusterSession::new(analysis.history, analysis.partition)?),
    };
    let state = match assets {
        Some(dir) => state.with_assets(dir),
        None => state,
    };

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = service::bind(port).await?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        service::serve(listener, state.clone(), shutdown_signal()).await?;
        let sidecar = state.sidecar().await;
        std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")
            .with_context(|| format!("writing {}", sidecar_path.display()))?;
        eprintln!("session saved to {}", sidecar_path.display());
        Ok(())
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ExportError>() {
            return match e {
                ExportError::CyclicClusterDependency { .. } => 4,
                ExportError::OutputExists(_) | ExportError::Partition(_) => 2,
                _ => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<AnalysisError>() {
            return if e.is_input_error() { 2 } else { 3 };
        }
        if cause.downcast_ref::<ServeError>().is_some() {
            return 2;
        }
    }
    3
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze { input, config, output } => analyze(input, config, output.as_deref()),
        Command::Serve {
            input,
            config,
            port,
            assets,
            fresh,
        } => serve(input, config, *port, assets.clone(), *fresh),
        Command::Export {
            input,
            config,
            partition,
            message_template,
            output,
            bundle,
        } => export(
            input,
            config,
            partition.as_deref(),
            message_template,
            output,
            bundle.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
