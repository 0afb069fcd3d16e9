use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use ei_gateway::{serve, Gateway, ServerConfig};

/// Serve registered command-line tools over HTTP.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Server config file (`key = value` lines).
    #[arg(long, env = "EI_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides `listen`.
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// Overrides `config_dir`.
    #[arg(long)]
    config_dir: Option<PathBuf>,
    /// Overrides `state_root`.
    #[arg(long)]
    state_root: Option<PathBuf>,
    /// Overrides `static_dir`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(path) => match ServerConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("ei-server: {}: {e}", path.display());
                return ExitCode::from(78);
            }
        },
        None => ServerConfig::default(),
    };
    if let Some(v) = args.listen {
        config.listen = v;
    }
    if let Some(v) = args.config_dir {
        config.config_dir = v;
    }
    if let Some(v) = args.state_root {
        config.state_root = v;
    }
    if let Some(v) = args.static_dir {
        config.static_dir = Some(v);
    }

    let gateway = match Gateway::from_config(&config) {
        Ok(g) => Arc::new(g),
        Err(e) => {
            eprintln!("ei-server: {e}");
            return ExitCode::from(78);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("ei-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.listen).await?;
        serve(listener, gateway, &config).await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ei-server: {e}");
            ExitCode::FAILURE
        }
    }
}
