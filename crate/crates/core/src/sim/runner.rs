//! End-to-end scenario execution.
//!
//! A run purges a fresh ledger, starts the gateway on loopback, starts an
//! echo server per device, registers every device, runs one daemon per edge
//! server for the collection period, then asks the gateway for a selection.
//! Each server probes from its own loopback source address (127.0.1.k) so the
//! sensor's echo server can tell the links apart and delay each reply by that
//! server's link profile.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use tokio::sync::watch;
use tokio::task::JoinHandle;

use super::link::{stream_rng, LinkTable, SyntheticMeter, VirtualLink};
use super::report::{ScenarioReport, ServerReport};
use super::scenario::{ScenarioError, ScenarioSpec};
use crate::clock::{Clock, ScaledClock};
use crate::contracts::{self, ops, DeviceRecord, LatencyAnalysis, ResourceAnalysis};
use crate::daemon::{self, DaemonConfig, EchoServer, FixedWorkloads, LoopReport};
use crate::gateway::{self, ClientError, GatewayClient, SelectRequest};
use crate::ledger::{self, Ledger, LedgerConfig, LedgerError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("gateway: {0}")]
    Gateway(#[from] ClientError),
    #[error("ledger not empty after purge: {0} entries")]
    PurgeFailed(usize),
    #[error("daemon {0}: {1}")]
    Daemon(String, String),
}

/// Everything a run leaves behind. The ledger stays open so callers can
/// inspect the raw records.
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub ledger: Arc<Ledger>,
    pub daemon_reports: Vec<(String, LoopReport)>,
    _dir: tempfile::TempDir,
}

/// Source address of the `index`-th edge server.
pub fn server_source_ip(index: usize) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(127, 0, 1, (index + 1) as u8))
}

pub fn credential_for(device_id: &str) -> String {
    format!("sim-credential-{device_id}")
}

pub async fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport, SimError> {
    Ok(run_scenario_full(spec).await?.report)
}

struct Running {
    id: String,
    stop: watch::Sender<bool>,
    task: JoinHandle<Result<LoopReport, String>>,
}

pub async fn run_scenario_full(spec: &ScenarioSpec) -> Result<ScenarioRun, SimError> {
    spec.validate()?;
    let started = Instant::now();
    let target_id = spec.target_id()?.to_string();

    // fresh ledger
    let dir = tempfile::tempdir()?;
    let log_path = dir.path().join("blocks.log");
    ledger::purge(&log_path)?;
    let clock: Arc<dyn Clock> = Arc::new(ScaledClock::new(spec.time_scale));
    let ledger = Arc::new(Ledger::open(
        LedgerConfig {
            max_txs: spec.block_max_txs,
            block_timeout: Duration::from_millis(spec.block_timeout_ms),
            log_path: Some(log_path),
        },
        contracts::default_registry(),
        clock.clone(),
    )?);
    let leftover = ledger.range_query("").len();
    if leftover != 0 {
        return Err(SimError::PurgeFailed(leftover));
    }

    let gw = gateway::spawn(SocketAddr::from(([127, 0, 0, 1], 0)), ledger.clone(), Vec::new()).await?;
    let client = GatewayClient::new(&gw.url());

    // echo servers: sensors see every server's link, servers answer plainly
    let (echo_stop, echo_rx) = watch::channel(false);
    let mut links = LinkTable::new();
    for (k, d) in spec.servers().enumerate() {
        let profile = d.link.clone().expect("validated");
        links.insert(
            server_source_ip(k),
            VirtualLink::new(profile, stream_rng(spec.rng_seed, 2 * k as u64)),
        );
    }
    let links: Arc<LinkTable> = Arc::new(links);
    let mut echo_tasks = Vec::new();
    let mut server_index = 0;
    for d in &spec.devices {
        let bind = if d.is_server() {
            server_index += 1;
            server_source_ip(server_index - 1)
        } else {
            IpAddr::V4(Ipv4Addr::LOCALHOST)
        };
        let mut server = EchoServer::bind(SocketAddr::new(bind, 0), &credential_for(&d.id)).await?;
        if !d.is_server() {
            server = server.with_link(links.clone());
        }
        let address = server.local_addr()?.to_string();
        let mut rx = echo_rx.clone();
        echo_tasks.push(tokio::spawn(server.serve(async move {
            let _ = rx.wait_for(|v| *v).await;
        })));
        client
            .create_device(&DeviceRecord {
                id: d.id.clone(),
                name: d.name.clone(),
                role: d.role,
                has_gpu: d.has_gpu,
                address,
                credential_ref: credential_for(&d.id),
                active: true,
            })
            .await?;
    }

    // daemons: every server, plus sensors that report resources
    let tick = Duration::from_secs_f64(spec.tick_seconds);
    let mut running = Vec::new();
    let mut server_index = 0;
    for (i, d) in spec.devices.iter().enumerate() {
        let source = if d.is_server() {
            server_index += 1;
            Some(server_source_ip(server_index - 1))
        } else {
            None
        };
        let Some(profile) = d.resources.clone() else { continue };
        let mut config = DaemonConfig::new(d.id.clone(), gw.url());
        config.interval = tick;
        config.probe_timeout = Duration::from_millis(spec.probe_timeout_ms);
        config.probe_bind = source;
        let meter = SyntheticMeter::new(profile.clone(), stream_rng(spec.rng_seed, 2 * i as u64 + 1));
        let (stop, rx) = watch::channel(false);
        let task = tokio::spawn(daemon::run_loop(
            config,
            Box::new(meter),
            Arc::new(FixedWorkloads(profile.container_count)),
            rx,
        ));
        if let Some(after) = d.stop_after_seconds {
            let early = stop.clone();
            tokio::spawn(async move {
                tokio::time::sleep(Duration::from_secs_f64(after)).await;
                let _ = early.send(true);
            });
        }
        running.push(Running {
            id: d.id.clone(),
            stop,
            task,
        });
    }

    tokio::time::sleep(Duration::from_secs_f64(spec.collection_seconds)).await;
    for r in &running {
        let _ = r.stop.send(true);
    }
    let mut daemon_reports = Vec::new();
    for r in running {
        let out = r
            .task
            .await
            .map_err(|e| SimError::Daemon(r.id.clone(), e.to_string()))?
            .map_err(|e| SimError::Daemon(r.id.clone(), e))?;
        daemon_reports.push((r.id, out));
    }

    let now_ms = clock.now_ms();
    let window = spec.selection_window_minutes;
    let ranking = match client
        .select(&SelectRequest {
            target_id: target_id.clone(),
            requires_gpu: false,
            window_minutes: Some(window),
            label: String::new(),
            now_ms: Some(now_ms),
        })
        .await
    {
        Ok(r) => r,
        Err(ClientError::Api(e)) if e.code == "no_eligible_server" => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let stats = client.stats().await?;

    gw.shutdown().await;
    let _ = echo_stop.send(true);
    for t in echo_tasks {
        let _ = t.await;
    }

    let latency: LatencyAnalysis = evaluate(
        &ledger,
        contracts::LATENCY,
        ops::ANALYSE_LATENCY_TO_TARGET,
        vec![target_id.clone(), window.to_string(), now_ms.to_string()],
    )?;
    let mut servers = Vec::new();
    for d in spec.servers() {
        let res: ResourceAnalysis = evaluate(
            &ledger,
            contracts::RESOURCE,
            ops::ANALYSE_RESOURCES,
            vec![d.id.clone(), window.to_string(), now_ms.to_string()],
        )?;
        let lat = latency.for_server(&d.id);
        let failed_probes = daemon_reports
            .iter()
            .find(|(id, _)| id == &d.id)
            .map_or(0, |(_, r)| r.failed_probes);
        servers.push(ServerReport {
            server_id: d.id.clone(),
            name: d.name.clone(),
            connection: d.connection.clone(),
            mean_latency_ms: lat.filter(|l| l.sample_count > 0).map(|l| l.avg_latency_ms),
            latency_samples: lat.map_or(0, |l| l.sample_count),
            failed_probes,
            mean_cpu: res.avg_cpu,
            mean_mem: res.avg_memory,
            mean_containers: res.avg_containers,
        });
    }

    let report = ScenarioReport {
        name: spec.name.clone(),
        target_id,
        window_minutes: window,
        now_ms,
        servers,
        selected_server_id: ranking.first().map(|e| e.server_id.clone()),
        ranking,
        read_count: stats.read_count,
        read_mean_ms: stats.read_mean_ms,
        write_count: stats.write_count,
        write_mean_ms: stats.write_mean_ms,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(ScenarioRun {
        report,
        ledger,
        daemon_reports,
        _dir: dir,
    })
}

fn evaluate<T: serde::de::DeserializeOwned>(
    ledger: &Ledger,
    contract: &str,
    op: &str,
    args: Vec<String>,
) -> Result<T, SimError> {
    let raw = ledger.evaluate(contract, op, &args)?;
    Ok(serde_json::from_slice(&raw).expect("contract output decodes"))
}

/// Loads `path` and runs it on a fresh multi-threaded runtime.
pub fn run_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioReport, SimError> {
    let spec = super::scenario::load_scenario(path)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(run_scenario(&spec))
}
