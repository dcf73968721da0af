//! Command-line entry point. One binary; the role is picked by subcommand.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::clock::SystemClock;
use crate::contracts;
use crate::daemon::{self, DaemonConfig};
use crate::gateway;
use crate::ledger::{self, Ledger, LedgerConfig};
use crate::sim;

#[derive(Debug, Parser)]
#[command(name = "edgeledger", version, about = "Ledger-backed edge node selection")]
pub struct Cli {
    /// Log verbosity
    #[arg(long, value_enum, global = true, default_value = "info", env = "EDGELEDGER_LOG_LEVEL")]
    pub log_level: LogLevel,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    fn as_filter(self) -> &'static str {
        match self {
            LogLevel::Error => "error",
            LogLevel::Warn => "warn",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP gateway in front of a ledger
    Gateway(GatewayArgs),
    /// Run the per-device agent
    Daemon(DaemonArgs),
    /// Run one scenario and print its report
    Sim(SimArgs),
    /// Verify a block log; exits 1 when it is invalid
    Verify(VerifyArgs),
    /// Print world-state entries under a key prefix
    Query(QueryArgs),
}

#[derive(Debug, clap::Args)]
pub struct GatewayArgs {
    /// Address to serve HTTP on
    #[arg(long, default_value = "127.0.0.1:8080", env = "EDGELEDGER_LISTEN")]
    pub listen: SocketAddr,
    /// Block log file; in-memory ledger when omitted
    #[arg(long, env = "EDGELEDGER_LEDGER_PATH")]
    pub ledger_path: Option<PathBuf>,
    /// Cut a block once the oldest queued transaction is this old
    #[arg(long, default_value_t = 500, env = "EDGELEDGER_BLOCK_TIMEOUT_MS",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub block_timeout_ms: u64,
    /// Cut a block once this many transactions are queued
    #[arg(long, default_value_t = 10, env = "EDGELEDGER_BLOCK_MAX_TXS",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub block_max_txs: u64,
    /// POST each selection result here (repeatable)
    #[arg(long = "notify-url", env = "EDGELEDGER_NOTIFY_URL", value_delimiter = ',')]
    pub notify_urls: Vec<String>,
}

#[derive(Debug, clap::Args)]
pub struct DaemonArgs {
    /// Id of the device this daemon runs on
    #[arg(long, env = "EDGELEDGER_DEVICE_ID")]
    pub device_id: String,
    /// Base URL of the gateway
    #[arg(long, env = "EDGELEDGER_GATEWAY_URL")]
    pub gateway_url: String,
    /// Seconds between ticks
    #[arg(long, default_value_t = 30, env = "EDGELEDGER_INTERVAL_SECONDS",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub interval_seconds: u64,
    /// Answer probes on this address
    #[arg(long, env = "EDGELEDGER_LISTEN")]
    pub listen: Option<SocketAddr>,
    /// Per-probe timeout
    #[arg(long, default_value_t = 5000, env = "EDGELEDGER_PROBE_TIMEOUT_MS",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub probe_timeout_ms: u64,
    /// Credential probers must present; defaults to the device id
    #[arg(long, env = "EDGELEDGER_CREDENTIAL_REF")]
    pub credential_ref: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct SimArgs {
    /// Scenario file
    #[arg(long)]
    pub scenario: PathBuf,
    /// Expectation file; exit 1 unless the report matches it
    #[arg(long)]
    pub expect: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    /// Block log file
    #[arg(long, env = "EDGELEDGER_LEDGER_PATH")]
    pub ledger_path: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct QueryArgs {
    /// Block log file
    #[arg(long, env = "EDGELEDGER_LEDGER_PATH")]
    pub ledger_path: PathBuf,
    /// Key prefix, e.g. `device:`; everything when empty
    #[arg(long, default_value = "")]
    pub prefix: String,
}

fn init_logging(level: LogLevel) {
    let filter = tracing_subscriber::EnvFilter::try_from_env("EDGELEDGER_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level.as_filter()));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` and runs the command. Usage errors exit 2, operational
/// failures 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(cli.log_level);
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Gateway(a) => run_gateway(a),
        Command::Daemon(a) => run_daemon(a),
        Command::Sim(a) => run_sim(a),
        Command::Verify(a) => run_verify(a),
        Command::Query(a) => run_query(a),
    }
}

fn run_gateway(a: GatewayArgs) -> CliResult {
    let config = LedgerConfig {
        max_txs: a.block_max_txs as usize,
        block_timeout: Duration::from_millis(a.block_timeout_ms),
        log_path: a.ledger_path,
    };
    let ledger = Arc::new(Ledger::open(config, contracts::default_registry(), Arc::new(SystemClock))?);
    tracing::info!(height = ledger.height(), "ledger open");
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.listen).await?;
        tracing::info!("gateway listening on {}", listener.local_addr()?);
        let state = gateway::AppState::new(ledger, a.notify_urls);
        gateway::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(ExitCode::SUCCESS)
}

fn run_daemon(a: DaemonArgs) -> CliResult {
    let mut config = DaemonConfig::new(a.device_id, a.gateway_url);
    config.interval = Duration::from_secs(a.interval_seconds);
    config.probe_timeout = Duration::from_millis(a.probe_timeout_ms);
    config.listen_address = a.listen;
    config.credential_ref = a.credential_ref;
    let report = runtime()?.block_on(daemon::run(config))?;
    tracing::info!(
        ticks = report.tick_starts.len(),
        errors = report.errors,
        "daemon stopped"
    );
    Ok(ExitCode::SUCCESS)
}

fn run_sim(a: SimArgs) -> CliResult {
    let expectation = a.expect.as_ref().map(sim::load_expectation).transpose()?;
    let report = sim::run_scenario_file(&a.scenario)?;
    let json = report.to_json();
    match &a.out {
        Some(path) => std::fs::write(path, format!("{json}\n"))?,
        None => println!("{json}"),
    }
    if let Some(exp) = expectation {
        let cmp = sim::compare_to_expectation(&report, &exp);
        for d in &cmp.diffs {
            eprintln!("mismatch: {d}");
        }
        if !cmp.pass {
            return Ok(ExitCode::from(1));
        }
        eprintln!("expectation met");
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(a: VerifyArgs) -> CliResult {
    let report = ledger::verify_log_file(&a.ledger_path)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run_query(a: QueryArgs) -> CliResult {
    if !a.ledger_path.exists() {
        return Err(format!("no block log at {}", a.ledger_path.display()).into());
    }
    let raw = ledger::read_records(&a.ledger_path)?;
    let report = ledger::verify_log_file(&a.ledger_path)?;
    if !report.valid {
        return Err(format!(
            "block log is invalid at height {:?}: {}",
            report.first_bad_height,
            report.reason.unwrap_or_default()
        )
        .into());
    }
    let blocks = raw
        .records
        .iter()
        .map(|r| ledger::Block::decode(r))
        .collect::<Result<Vec<_>, _>>()?;
    let world = ledger::WorldState::replay(&blocks);
    for (k, v) in world.range_prefix(&a.prefix) {
        println!("{k}\t{}", String::from_utf8_lossy(&v));
    }
    Ok(ExitCode::SUCCESS)
}
