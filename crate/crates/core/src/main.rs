use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use linkdash::agents::{AgentConfig, CompletionBackend, RemoteBackend, RemoteConfig};
use linkdash::datapackage::load_package;
use linkdash::service::{load_transcript, replay, router, AppState};

#[derive(Parser)]
#[command(name = "linkdash", version, about = "Conversational linked dashboards over data packages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a data package and summarize it.
    Validate { package: PathBuf },
    /// Serve the HTTP API.
    Serve {
        /// Descriptor of a package to serve; repeat for several.
        #[arg(long, required = true)]
        package: Vec<PathBuf>,
        /// `scripted:<transcript>` or `remote`.
        #[arg(long, default_value = "remote")]
        backend: String,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for session snapshots.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[command(flatten)]
        agents: AgentArgs,
    },
    /// Replay a transcript and print per-step counts and the final digest.
    Replay {
        transcript: PathBuf,
        /// Write the final snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[command(flatten)]
        agents: AgentArgs,
    },
}

#[derive(clap::Args)]
struct AgentArgs {
    #[arg(long, env = "LINKDASH_CARDINALITY_THRESHOLD", default_value_t = AgentConfig::default().cardinality_threshold)]
    cardinality_threshold: usize,
    #[arg(long, env = "LINKDASH_CONTEXT_BUDGET", default_value_t = AgentConfig::default().context_budget)]
    context_budget: usize,
}

impl AgentArgs {
    fn config(&self) -> AgentConfig {
        AgentConfig {
            cardinality_threshold: self.cardinality_threshold,
            context_budget: self.context_budget,
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Validate { package } => {
            let pkg = load_package(&package)?;
            println!("package {}", pkg.name);
            for e in &pkg.entities {
                println!("  {}: {} fields, {} rows", e.name, e.fields.len(), e.row_count());
            }
            for r in &pkg.relations {
                println!(
                    "  {}({}) -> {}({})",
                    r.from_entity,
                    r.from_fields.join(","),
                    r.to_entity,
                    r.to_fields.join(",")
                );
            }
            for w in &pkg.warnings {
                println!("  warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            package,
            backend,
            addr,
            data_dir,
            agents,
        } => {
            let packages = package.iter().map(load_package).collect::<Result<Vec<_>, _>>()?;
            let backend: Arc<dyn CompletionBackend> = match backend.split_once(':') {
                Some(("scripted", path)) => Arc::new(load_transcript(path)?.backend()),
                _ if backend == "remote" => {
                    let config = RemoteConfig::from_env().ok_or("LINKDASH_BACKEND_URL is not set")?;
                    Arc::new(RemoteBackend::new(config)?)
                }
                _ => return Err(format!("unknown backend {backend:?}").into()),
            };
            let app = AppState::new(packages, backend, agents.config(), data_dir)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!(%addr, "listening");
                axum::serve(listener, router(app))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            transcript,
            snapshot,
            agents,
        } => {
            let loaded = load_transcript(&transcript)?;
            let report = replay(&loaded, &agents.config())?;
            for step in &report.steps {
                let counts: Vec<String> = step.counts.iter().map(|(e, n)| format!("{e}={n}")).collect();
                println!("{:>3} v{:<3} {:<60} {}", step.index, step.version, step.label, counts.join(" "));
            }
            if let Some(path) = snapshot {
                std::fs::write(path, report.snapshot.to_json())?;
            }
            println!("digest {}", report.digest);
            let expected = loaded.transcript.expected_digest.as_deref();
            if report.digest_matches(expected) {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("digest mismatch: expected {}", expected.unwrap_or_default());
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
