use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use borrowsize::Execution;
use borrowsize_service::store::ScenarioStore;
use borrowsize_service::{router, AppState};
use clap::Parser;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    version,
    about = "HTTP service for historical-borrowing sample size computations"
)]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "BORROWSIZE_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// JSON file holding saved scenarios; created on first write.
    #[arg(
        long,
        env = "BORROWSIZE_STORE",
        default_value = "borrowsize-store.json"
    )]
    store: PathBuf,
    /// Run Monte Carlo and sweeps on one thread.
    #[arg(long)]
    sequential: bool,
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let args = Args::parse();
    let store = ScenarioStore::open(&args.store).context("opening scenario store")?;
    let state = AppState {
        store: Arc::new(store),
        mode: if args.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    let listener = tokio::net::TcpListener::bind(args.addr)
        .await
        .with_context(|| format!("binding {}", args.addr))?;
    tracing::info!(addr = %args.addr, store = %args.store.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .context("serving")?;
    Ok(())
}
