use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use bomlot_api::{IdMode, Service};
use clap::Parser;
use tracing_subscriber::EnvFilter;

/// BoM/BoL traceability gateway over HTTP.
#[derive(Debug, Parser)]
#[command(name = "bomlot-server", version)]
struct Args {
    /// Address to bind.
    #[arg(long, env = "BOMLOT_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,

    /// Directory holding the journal.
    #[arg(long, env = "BOMLOT_DATA_DIR", default_value = "bomlot-data")]
    data_dir: PathBuf,

    /// Sequential ids and a logical clock, for tests.
    #[arg(long, env = "BOMLOT_DETERMINISTIC_IDS")]
    deterministic_ids: bool,

    /// Prefix every route with this path, e.g. `/api`.
    #[arg(long, env = "BOMLOT_BASE_PATH", default_value = "")]
    base_path: String,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let args = Args::parse();
    let mode = if args.deterministic_ids { IdMode::Deterministic } else { IdMode::Random };
    let service = Arc::new(Service::open_dir(&args.data_dir, mode)?);
    let router = bomlot_api::http::router(service, &args.base_path);

    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    println!("listening on http://{}", listener.local_addr()?);
    tracing::info!(addr = %listener.local_addr()?, data_dir = %args.data_dir.display(), "listening");
    axum::serve(listener, router).with_graceful_shutdown(shutdown()).await?;
    Ok(())
}

async fn shutdown() {
    let _ = tokio::signal::ctrl_c().await;
}
