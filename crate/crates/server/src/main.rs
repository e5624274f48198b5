use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use tagmill_core::catalog::parse_dataset_document;
use tagmill_core::export::ExportFilter;
use tagmill_core::{Platform, StoreOptions};
use tagmill_server::{app_with_cors, AppState, ServerConfig};

#[derive(Parser)]
#[command(name = "tagmill", version, about = "Collaborative text annotation server")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "TAGMILL_CONFIG")]
    config: Option<PathBuf>,
    /// Directory holding the database.
    #[arg(long, global = true, env = "TAGMILL_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "TAGMILL_PORT")]
        port: Option<u16>,
        #[arg(long, env = "TAGMILL_BIND")]
        bind: Option<String>,
    },
    /// Load a dataset file into the store and print the new dataset.
    ImportDataset {
        file: PathBuf,
        /// Name used when the file does not carry one.
        #[arg(long)]
        name: Option<String>,
    },
    /// Write a job's annotations as JSONL.
    ExportJob {
        job_id: String,
        /// `all` or `accepted`.
        #[arg(long, default_value = "all")]
        filter: String,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<ServerConfig> {
    let mut config = match &cli.config {
        Some(path) => ServerConfig::load(path)?,
        None => ServerConfig::default(),
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    Ok(config)
}

fn open_platform(config: &ServerConfig) -> anyhow::Result<Platform> {
    let path = config.database_path();
    Platform::open(&path, StoreOptions::default()).with_context(|| format!("opening {}", path.display()))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut config = load_config(&cli)?;

    match cli.command {
        Command::Serve { port, bind } => {
            if let Some(port) = port {
                config.port = port;
            }
            if let Some(bind) = bind {
                config.bind = bind;
            }
            if config.tokens.is_empty() {
                tracing::warn!("no tokens configured; every request will be refused");
            }
            let platform = Arc::new(open_platform(&config)?);
            let state = AppState::new(platform, &config.tokens)?;
            let app = app_with_cors(state, &config.cors_origins);
            let addr: SocketAddr = format!("{}:{}", config.bind, config.port).parse().context("bad bind address")?;
            let listener = tokio::net::TcpListener::bind(addr).await?;
            tracing::info!(%addr, "listening");
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::ImportDataset { file, name } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let fallback = name.unwrap_or_else(|| {
                file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
            });
            let platform = open_platform(&config)?;
            let doc = match parse_dataset_document(&text) {
                Ok(doc) => doc,
                Err(tagmill_core::Error::MalformedDataset(diags)) => {
                    for d in &diags {
                        eprintln!("{}: {}", d.field, d.message);
                    }
                    anyhow::bail!("{} problem(s) in {}", diags.len(), file.display());
                }
                Err(e) => return Err(e.into()),
            };
            let dataset = platform.import_dataset_document(&doc, &fallback)?;
            println!("{}", serde_json::to_string_pretty(&dataset)?);
        }
        Command::ExportJob { job_id, filter, output } => {
            let filter = ExportFilter::parse(&filter).with_context(|| format!("unknown filter {filter:?}"))?;
            let platform = open_platform(&config)?;
            let text = platform.export_job(&job_id, filter)?;
            match output {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
