use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use arena_core::agents::ConsoleHumans;
use arena_core::analysis::{emit_report, Lexicon, ReportOptions};
use arena_core::engine::{default_registry, GameSpec};
use arena_core::runner::{run_batch, RunConfig};
use arena_core::tracestore::TraceStore;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "arena", version, about = "Language-model agents playing strategic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the registered games.
    ListGames,
    /// Execute a batch of episodes described by a JSON run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's worker count.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write report CSVs for a stored run.
    Analyze {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        run: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        bins: u32,
        /// JSON object mapping label names to cue phrase lists.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Serve the live-match API and web page.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Trace store for finished matches.
        #[arg(long)]
        db: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::ListGames => {
            let reg = default_registry();
            for name in reg.names() {
                let meta = reg.create(&GameSpec::new(name))?.metadata();
                println!("{name}  players={}  simultaneous={}", meta.num_players, meta.simultaneous);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            parallelism,
            seed,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            let mut config = RunConfig::from_json(&text)?;
            if let Some(p) = parallelism {
                config.parallelism = p;
            }
            if let Some(s) = seed {
                config.base_seed = s;
            }
            let summary = run_batch(&config, &ConsoleHumans)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.all_finished() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Analyze {
            db,
            run,
            out,
            bins,
            lexicon,
        } => {
            if !db.exists() {
                return Err(format!("{} does not exist", db.display()).into());
            }
            let store = TraceStore::open(&db)?;
            let opts = ReportOptions {
                bins,
                lexicon: lexicon.as_deref().map(Lexicon::load).transpose()?.unwrap_or_default(),
                ..ReportOptions::default()
            };
            let (_, files) = emit_report(&store, &run, &out, &opts)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { addr, db } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(arena_server::serve(addr, db))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
