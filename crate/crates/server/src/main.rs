use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use linkspace::session::headless_run;
use linkspace_server::{router, AppState};

#[derive(Parser)]
#[command(name = "linkspace", version, about = "Cluster one variable space, explore the result in another")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Compute assignments and plot data from a CSV file and a settings
    /// document, without a service.
    Export {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        settings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Precomputed distance matrix, for settings that cluster on one.
        #[arg(long)]
        distances: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn export(data: PathBuf, settings: PathBuf, out: PathBuf, distances: Option<PathBuf>) -> Result<(), String> {
    let csv = read(&data)?;
    let settings = String::from_utf8(read(&settings)?).map_err(|e| format!("{}: {e}", settings.display()))?;
    let distances = distances.as_ref().map(read).transpose()?;
    let bundle = headless_run(&csv, &settings, distances.as_deref(), Some(&out)).map_err(|e| e.to_string())?;
    let rows = bundle.assignments_csv.lines().count().saturating_sub(1);
    println!("wrote {rows} assignments and {} plot documents to {}", bundle.plots.len(), out.display());
    Ok(())
}

async fn serve(host: String, port: u16) -> Result<(), String> {
    let listener = tokio::net::TcpListener::bind((host.as_str(), port))
        .await
        .map_err(|e| format!("bind {host}:{port}: {e}"))?;
    println!("listening on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, router(AppState::default()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { port, host } => tokio::runtime::Runtime::new()
            .map_err(|e| e.to_string())
            .and_then(|rt| rt.block_on(serve(host, port))),
        Command::Export {
            data,
            settings,
            out,
            distances,
        } => export(data, settings, out, distances),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
