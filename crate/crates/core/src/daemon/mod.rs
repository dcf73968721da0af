//! Per-device agent.
//!
//! Every interval the daemon asks the gateway for its probe targets, probes
//! them concurrently, posts the batch, then samples local resources and posts
//! the sample. Each tick runs on its own task so a slow probe does not push
//! the next tick back.

pub mod echo;
pub mod meter;
pub mod probe;

use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use tokio::sync::watch;
use tokio::task::JoinSet;
use tokio::time::MissedTickBehavior;

use crate::contracts::LatencyRecord;
use crate::gateway::GatewayClient;

pub use echo::{serve_echo, EchoServer, FixedDelay, LinkEffect, LinkModel};
pub use meter::{
    sample_resources, FixedWorkloads, MeterError, NoWorkloads, ResourceMeter, SystemMeter,
    WorkloadCounter,
};
pub use probe::{ProbeResult, ProbeTarget, Prober};

pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(30);
pub const DEFAULT_PROBE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct DaemonConfig {
    pub device_id: String,
    pub gateway_url: String,
    pub interval: Duration,
    pub probe_timeout: Duration,
    /// Where this device answers probes, if it does.
    pub listen_address: Option<SocketAddr>,
    pub credential_ref: Option<String>,
    /// Source address for outgoing probes.
    pub probe_bind: Option<IpAddr>,
    pub fan_out: usize,
}

impl DaemonConfig {
    pub fn new(device_id: impl Into<String>, gateway_url: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            gateway_url: gateway_url.into(),
            interval: DEFAULT_INTERVAL,
            probe_timeout: DEFAULT_PROBE_TIMEOUT,
            listen_address: None,
            credential_ref: None,
            probe_bind: None,
            fan_out: 16,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.device_id.is_empty() {
            return Err("device id must not be empty".into());
        }
        if self.gateway_url.is_empty() {
            return Err("gateway url must not be empty".into());
        }
        if self.interval.is_zero() {
            return Err("interval must be positive".into());
        }
        if self.probe_timeout.is_zero() {
            return Err("probe timeout must be positive".into());
        }
        if self.fan_out == 0 {
            return Err("fan-out must be positive".into());
        }
        Ok(())
    }

    fn prober(&self) -> Prober {
        Prober {
            timeout: self.probe_timeout,
            bind_ip: self.probe_bind,
            fan_out: self.fan_out,
        }
    }
}

/// What a run loop did before it was stopped.
#[derive(Debug, Clone, Default)]
pub struct LoopReport {
    /// Tick start times relative to the loop start.
    pub tick_starts: Vec<Duration>,
    pub latency_batches: u64,
    pub resource_samples: u64,
    pub failed_probes: u64,
    pub errors: u64,
}

struct Tick {
    config: Arc<DaemonConfig>,
    client: GatewayClient,
    prober: Prober,
    meter: Arc<Mutex<Box<dyn ResourceMeter>>>,
    workloads: Arc<dyn WorkloadCounter>,
    report: Arc<Mutex<LoopReport>>,
}

impl Tick {
    async fn run(&self) {
        let id = &self.config.device_id;
        match self.client.targets(id).await {
            Ok(targets) => {
                let results = self.prober.measure_latency(&targets).await;
                let failed = results.iter().filter(|r| r.latency_ms < 0).count() as u64;
                self.report.lock().failed_probes += failed;
                if !results.is_empty() {
                    let batch: Vec<LatencyRecord> = results
                        .into_iter()
                        .map(|r| LatencyRecord {
                            source_id: id.clone(),
                            target_id: r.target_id,
                            timestamp_ms: 0,
                            latency_ms: r.latency_ms,
                        })
                        .collect();
                    match self.client.post_latency(&batch).await {
                        Ok(_) => self.report.lock().latency_batches += 1,
                        Err(e) => self.fail(format_args!("posting latency batch: {e}")),
                    }
                }
            }
            Err(e) => self.fail(format_args!("fetching targets: {e}")),
        }

        let sample = sample_resources(id, &mut **self.meter.lock(), self.workloads.as_ref());
        match sample {
            Ok(s) => match self.client.post_resource(&s).await {
                Ok(_) => self.report.lock().resource_samples += 1,
                Err(e) => self.fail(format_args!("posting resource sample: {e}")),
            },
            Err(e) => self.fail(format_args!("sampling resources: {e}")),
        }
    }

    fn fail(&self, what: std::fmt::Arguments<'_>) {
        tracing::warn!(device = %self.config.device_id, "{what}");
        self.report.lock().errors += 1;
    }
}

/// Runs until `shutdown` flips to true, then waits for in-flight ticks.
pub async fn run_loop(
    config: DaemonConfig,
    meter: Box<dyn ResourceMeter>,
    workloads: Arc<dyn WorkloadCounter>,
    mut shutdown: watch::Receiver<bool>,
) -> Result<LoopReport, String> {
    config.validate()?;
    let report = Arc::new(Mutex::new(LoopReport::default()));
    let tick = Arc::new(Tick {
        client: GatewayClient::with_timeout(
            &config.gateway_url,
            config.interval.max(config.probe_timeout) * 2,
        ),
        prober: config.prober(),
        config: Arc::new(config),
        meter: Arc::new(Mutex::new(meter)),
        workloads,
        report: report.clone(),
    });

    let started = Instant::now();
    let mut interval = tokio::time::interval(tick.config.interval);
    interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut running = JoinSet::new();
    loop {
        if *shutdown.borrow() {
            break;
        }
        tokio::select! {
            _ = interval.tick() => {
                report.lock().tick_starts.push(started.elapsed());
                let t = tick.clone();
                running.spawn(async move { t.run().await });
            }
            changed = shutdown.changed() => {
                if changed.is_err() {
                    break;
                }
            }
            Some(_) = running.join_next(), if !running.is_empty() => {}
        }
    }
    while running.join_next().await.is_some() {}
    let out = report.lock().clone();
    Ok(out)
}

/// Runs the daemon until Ctrl-C, answering probes too when a listen address
/// is configured.
pub async fn run(config: DaemonConfig) -> Result<LoopReport, String> {
    config.validate()?;
    let (tx, rx) = watch::channel(false);
    let echo = match config.listen_address {
        Some(addr) => {
            let cred = config.credential_ref.clone().unwrap_or_else(|| config.device_id.clone());
            let server = EchoServer::bind(addr, &cred)
                .await
                .map_err(|e| format!("binding echo listener {addr}: {e}"))?;
            tracing::info!("answering probes on {}", server.local_addr().map_err(|e| e.to_string())?);
            let mut stop = rx.clone();
            Some(tokio::spawn(server.serve(async move {
                let _ = stop.wait_for(|v| *v).await;
            })))
        }
        None => None,
    };
    tokio::spawn(async move {
        let _ = tokio::signal::ctrl_c().await;
        let _ = tx.send(true);
    });
    let report = run_loop(config, Box::new(SystemMeter::new()), Arc::new(NoWorkloads), rx).await;
    if let Some(h) = echo {
        let _ = h.await;
    }
    report
}
