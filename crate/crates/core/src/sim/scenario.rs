//! Scenario files.
//!
//! ```toml
//! name = "exp1-ethernet"
//! collectionSeconds = 30
//! tickSeconds = 1
//! selectionWindowMinutes = 10
//! timeScale = 30
//! rngSeed = 1
//!
//! [[devices]]
//! id = "upboard"
//! name = "Up Board"
//! role = "edge-server"
//! connection = "Ethernet"
//! link = { baseOneWayMs = 136.5, jitterMs = 1.0 }
//! resources = { cpuMean = 2.08, cpuJitter = 0.5, memMean = 9.39, memJitter = 0.3 }
//!
//! [[devices]]
//! id = "rpi4"
//! name = "Raspberry 4"
//! role = "sensor"
//! ```
//!
//! Times in the file are wall-clock seconds of the compressed run; the ledger
//! clock runs `timeScale` times faster, so `selectionWindowMinutes` is in
//! ledger minutes.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contracts::{validate_id, Role};

/// Ledger-minutes of window per tick interval.
pub const WINDOW_TICK_RATIO: f64 = 20.0;
/// Highest number of edge servers; each gets its own loopback source address.
pub const MAX_SERVERS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LinkProfile {
    pub base_one_way_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
    #[serde(default)]
    pub failure_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ResourceProfile {
    pub cpu_mean: f64,
    #[serde(default)]
    pub cpu_jitter: f64,
    pub mem_mean: f64,
    #[serde(default)]
    pub mem_jitter: f64,
    #[serde(default)]
    pub container_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub name: String,
    pub role: Role,
    #[serde(default)]
    pub has_gpu: bool,
    /// Free-form label carried into the report.
    #[serde(default)]
    pub connection: String,
    /// The device's daemon stops this many seconds into the collection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after_seconds: Option<f64>,
    /// Link between this server and the sensors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<ResourceProfile>,
}

impl DeviceSpec {
    pub fn is_server(&self) -> bool {
        self.role == Role::EdgeServer
    }
}

fn default_collection() -> f64 {
    30.0
}
fn default_tick() -> f64 {
    1.0
}
fn default_window() -> u32 {
    10
}
fn default_scale() -> f64 {
    30.0
}
fn default_block_timeout() -> u64 {
    100
}
fn default_block_txs() -> usize {
    10
}
fn default_probe_timeout() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "default_collection")]
    pub collection_seconds: f64,
    #[serde(default = "default_tick")]
    pub tick_seconds: f64,
    #[serde(default = "default_window")]
    pub selection_window_minutes: u32,
    #[serde(default = "default_scale")]
    pub time_scale: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_block_timeout")]
    pub block_timeout_ms: u64,
    #[serde(default = "default_block_txs")]
    pub block_max_txs: usize,
    #[serde(default = "default_probe_timeout")]
    pub probe_timeout_ms: u64,
    /// Sensor the selection runs for; may be omitted when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub devices: Vec<DeviceSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Parses and validates; parse errors carry the line and column.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn finite_nonneg(what: &str, v: f64) -> Result<(), ScenarioError> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(format!("{what} must be a finite number >= 0, got {v}")));
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(invalid("name must not be empty"));
        }
        for (what, v) in [
            ("tickSeconds", self.tick_seconds),
            ("collectionSeconds", self.collection_seconds),
            ("timeScale", self.time_scale),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(format!("{what} must be positive, got {v}")));
            }
        }
        if self.collection_seconds < 3.0 * self.tick_seconds {
            return Err(invalid(format!(
                "collectionSeconds ({}) must be at least 3 x tickSeconds ({})",
                self.collection_seconds, self.tick_seconds
            )));
        }
        if self.selection_window_minutes == 0 {
            return Err(invalid("selectionWindowMinutes must be positive"));
        }
        let ratio = self.selection_window_minutes as f64 * 60.0 / (self.tick_seconds * self.time_scale);
        if (ratio - WINDOW_TICK_RATIO).abs() > 1e-9 * WINDOW_TICK_RATIO {
            return Err(invalid(format!(
                "selectionWindowMinutes x 60 / (tickSeconds x timeScale) must be {WINDOW_TICK_RATIO}, got {ratio}"
            )));
        }
        if self.block_timeout_ms == 0 || self.block_max_txs == 0 || self.probe_timeout_ms == 0 {
            return Err(invalid(
                "blockTimeoutMs, blockMaxTxs and probeTimeoutMs must be positive",
            ));
        }

        let mut ids = HashSet::new();
        for d in &self.devices {
            validate_id(&d.id).map_err(|e| invalid(e.to_string()))?;
            if !ids.insert(d.id.as_str()) {
                return Err(invalid(format!("device id {} appears twice", d.id)));
            }
            self.validate_device(d)?;
        }
        let servers = self.servers().count();
        if servers == 0 {
            return Err(invalid("at least one edge-server device is required"));
        }
        if servers > MAX_SERVERS {
            return Err(invalid(format!("at most {MAX_SERVERS} edge servers are supported")));
        }
        self.target_id()?;
        Ok(())
    }

    fn validate_device(&self, d: &DeviceSpec) -> Result<(), ScenarioError> {
        let ctx = |msg: String| invalid(format!("device {}: {msg}", d.id));
        if let Some(s) = d.stop_after_seconds {
            if !s.is_finite() || s < 0.0 {
                return Err(ctx(format!("stopAfterSeconds must be >= 0, got {s}")));
            }
        }
        if d.is_server() {
            let link = d.link.as_ref().ok_or_else(|| ctx("edge servers need a link".into()))?;
            finite_nonneg(&format!("device {}: baseOneWayMs", d.id), link.base_one_way_ms)?;
            finite_nonneg(&format!("device {}: jitterMs", d.id), link.jitter_ms)?;
            let p = link.failure_probability;
            if !(0.0..=1.0).contains(&p) {
                return Err(ctx(format!("failureProbability must be in [0, 1], got {p}")));
            }
            if d.resources.is_none() {
                return Err(ctx("edge servers need a resource profile".into()));
            }
        } else if d.link.is_some() {
            return Err(ctx("links belong to edge servers".into()));
        }
        if let Some(r) = &d.resources {
            for (what, v) in [
                ("cpuMean", r.cpu_mean),
                ("cpuJitter", r.cpu_jitter),
                ("memMean", r.mem_mean),
                ("memJitter", r.mem_jitter),
            ] {
                finite_nonneg(&format!("device {}: {what}", d.id), v)?;
            }
        }
        Ok(())
    }

    pub fn servers(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.devices.iter().filter(|d| d.is_server())
    }

    pub fn sensors(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.devices.iter().filter(|d| !d.is_server())
    }

    /// The sensor selection runs for.
    pub fn target_id(&self) -> Result<&str, ScenarioError> {
        match &self.target {
            Some(t) => match self.devices.iter().find(|d| &d.id == t) {
                Some(d) if !d.is_server() => Ok(t),
                Some(_) => Err(invalid(format!("target {t} is not a sensor"))),
                None => Err(invalid(format!("target {t} is not a listed device"))),
            },
            None => {
                let mut sensors = self.sensors();
                match (sensors.next(), sensors.next()) {
                    (Some(s), None) => Ok(&s.id),
                    (None, _) => Err(invalid("at least one sensor device is required")),
                    (Some(_), Some(_)) => Err(invalid("several sensors: set target")),
                }
            }
        }
    }
}
