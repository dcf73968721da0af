use serde::{Deserialize, Serialize};

use crate::ledger::ContractError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "edge-server")]
    EdgeServer,
    #[serde(rename = "sensor")]
    Sensor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeviceRecord {
    pub id: String,
    pub name: String,
    pub role: Role,
    pub has_gpu: bool,
    /// `host:port`
    pub address: String,
    /// Names a credential held outside the ledger.
    pub credential_ref: String,
    #[serde(default = "default_true")]
    pub active: bool,
}

fn default_true() -> bool {
    true
}

impl DeviceRecord {
    pub fn validate(&self) -> Result<(), ContractError> {
        validate_id(&self.id)?;
        split_host_port(&self.address)
            .ok_or_else(|| ContractError::Invalid(format!("address {:?} is not host:port", self.address)))?;
        Ok(())
    }

    pub fn is_server(&self) -> bool {
        self.role == Role::EdgeServer
    }
}

/// Device ids become key segments, so they may not be empty or contain `:`.
pub fn validate_id(id: &str) -> Result<(), ContractError> {
    if id.is_empty() {
        return Err(ContractError::Invalid("device id is empty".into()));
    }
    if id.contains(':') || id.chars().any(char::is_control) {
        return Err(ContractError::Invalid(format!(
            "device id {id:?} contains a reserved character"
        )));
    }
    Ok(())
}

pub fn split_host_port(addr: &str) -> Option<(&str, u16)> {
    let (host, port) = addr.rsplit_once(':')?;
    let host = host.trim_start_matches('[').trim_end_matches(']');
    if host.is_empty() {
        return None;
    }
    Some((host, port.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ResourceSample {
    pub device_id: String,
    /// Overwritten with the ordering timestamp when stored.
    #[serde(default)]
    pub timestamp_ms: i64,
    pub cpu_percent: f64,
    pub memory_percent: f64,
    pub container_count: u32,
}

impl ResourceSample {
    pub fn validate(&self) -> Result<(), ContractError> {
        validate_id(&self.device_id)?;
        for (name, v) in [("cpuPercent", self.cpu_percent), ("memoryPercent", self.memory_percent)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(ContractError::Invalid(format!("{name} {v} outside [0, 100]")));
            }
        }
        Ok(())
    }
}

/// Latency value recorded for a failed probe.
pub const PROBE_FAILED: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LatencyRecord {
    pub source_id: String,
    pub target_id: String,
    /// Overwritten with the ordering timestamp when stored.
    #[serde(default)]
    pub timestamp_ms: i64,
    pub latency_ms: i64,
}

impl LatencyRecord {
    pub fn validate(&self) -> Result<(), ContractError> {
        validate_id(&self.source_id)?;
        validate_id(&self.target_id)?;
        if self.latency_ms < 0 && self.latency_ms != PROBE_FAILED {
            return Err(ContractError::Invalid(format!(
                "latencyMs {} is negative and not the failure sentinel",
                self.latency_ms
            )));
        }
        Ok(())
    }

    pub fn succeeded(&self) -> bool {
        self.latency_ms >= 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceAnalysis {
    pub device_id: String,
    pub window_minutes: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub avg_cpu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub avg_memory: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub avg_containers: Option<f64>,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServerLatency {
    pub source_id: String,
    pub avg_latency_ms: f64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyAnalysis {
    pub target_id: String,
    pub window_minutes: u32,
    /// Ascending by `sourceId`.
    pub per_server: Vec<ServerLatency>,
}

impl LatencyAnalysis {
    pub fn for_server(&self, id: &str) -> Option<&ServerLatency> {
        self.per_server.iter().find(|s| s.source_id == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskProperties {
    #[serde(default)]
    pub requires_gpu: bool,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionEntry {
    pub server_id: String,
    pub avg_latency_ms: f64,
    pub avg_cpu: f64,
    pub avg_memory: f64,
    pub avg_containers: f64,
}
