use std::net::{IpAddr, SocketAddr};
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::{TcpSocket, TcpStream};

use super::echo::{auth_token, read_frame, write_frame, ACCEPT, MAX_FRAME};
use crate::clock::wall_clock_ms;
use crate::contracts::PROBE_FAILED;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeTarget {
    pub target_id: String,
    pub address: String,
    pub credential_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeResult {
    pub target_id: String,
    /// Milliseconds, or -1 when the probe failed.
    pub latency_ms: i64,
}

#[derive(Debug, Clone)]
pub struct Prober {
    pub timeout: Duration,
    /// Local address probes originate from.
    pub bind_ip: Option<IpAddr>,
    /// Concurrent probes per call.
    pub fan_out: usize,
}

impl Default for Prober {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(5),
            bind_ip: None,
            fan_out: 16,
        }
    }
}

impl Prober {
    pub fn new(timeout: Duration) -> Self {
        Self {
            timeout,
            ..Self::default()
        }
    }

    /// One result per target, in input order.
    pub async fn measure_latency(&self, targets: &[ProbeTarget]) -> Vec<ProbeResult> {
        let probes: Vec<_> = targets
            .iter()
            .cloned()
            .map(|t| {
                let prober = self.clone();
                async move {
                    let latency_ms = prober.probe(&t).await;
                    ProbeResult {
                        target_id: t.target_id,
                        latency_ms,
                    }
                }
            })
            .collect();
        stream::iter(probes)
            .buffered(self.fan_out.max(1))
            .collect()
            .await
    }

    /// Connect, authenticate, echo the start time and check it comes back
    /// unchanged. Elapsed milliseconds on success, -1 otherwise.
    pub async fn probe(&self, target: &ProbeTarget) -> i64 {
        let start = Instant::now();
        let stamp = wall_clock_ms().to_string();
        let token = auth_token(&target.credential_ref);
        let attempt = async {
            let mut stream = self.connect(&target.address).await?;
            write_frame(&mut stream, &token).await?;
            let mut verdict = [0u8; 1];
            tokio::io::AsyncReadExt::read_exact(&mut stream, &mut verdict).await?;
            if verdict[0] != ACCEPT {
                return Ok::<bool, std::io::Error>(false);
            }
            write_frame(&mut stream, stamp.as_bytes()).await?;
            let reply = read_frame(&mut stream, MAX_FRAME).await?;
            drop(stream);
            Ok(reply == stamp.as_bytes())
        };
        match tokio::time::timeout(self.timeout, attempt).await {
            Ok(Ok(true)) => start.elapsed().as_millis() as i64,
            Ok(Ok(false)) => PROBE_FAILED,
            Ok(Err(e)) => {
                tracing::debug!(target = %target.target_id, "probe failed: {e}");
                PROBE_FAILED
            }
            Err(_) => {
                tracing::debug!(target = %target.target_id, "probe timed out");
                PROBE_FAILED
            }
        }
    }

    async fn connect(&self, address: &str) -> std::io::Result<TcpStream> {
        let addr: SocketAddr = tokio::net::lookup_host(address)
            .await?
            .find(|a| self.bind_ip.is_none_or(|ip| ip.is_ipv4() == a.is_ipv4()))
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "no usable address"))?;
        let socket = if addr.is_ipv4() {
            TcpSocket::new_v4()?
        } else {
            TcpSocket::new_v6()?
        };
        if let Some(ip) = self.bind_ip {
            socket.bind(SocketAddr::new(ip, 0))?;
        }
        let stream = socket.connect(addr).await?;
        stream.set_nodelay(true)?;
        Ok(stream)
    }
}
