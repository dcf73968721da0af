//! Host resource sampling.

use sysinfo::System;

use crate::contracts::ResourceSample;

#[derive(Debug, thiserror::Error)]
pub enum MeterError {
    #[error("metric unavailable: {0}")]
    Unavailable(String),
}

/// CPU and memory utilisation, both in percent.
pub trait ResourceMeter: Send {
    fn read(&mut self) -> Result<(f64, f64), MeterError>;
}

/// Number of workloads the device is running.
pub trait WorkloadCounter: Send + Sync {
    fn count(&self) -> u32;
}

/// Used when no workload source is configured.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoWorkloads;

impl WorkloadCounter for NoWorkloads {
    fn count(&self) -> u32 {
        0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedWorkloads(pub u32);

impl WorkloadCounter for FixedWorkloads {
    fn count(&self) -> u32 {
        self.0
    }
}

/// Reads the local host through `sysinfo`. CPU usage is measured over the
/// interval since the previous read.
pub struct SystemMeter {
    sys: System,
}

impl SystemMeter {
    pub fn new() -> Self {
        let mut sys = System::new();
        sys.refresh_cpu_usage();
        Self { sys }
    }
}

impl Default for SystemMeter {
    fn default() -> Self {
        Self::new()
    }
}

impl ResourceMeter for SystemMeter {
    fn read(&mut self) -> Result<(f64, f64), MeterError> {
        self.sys.refresh_cpu_usage();
        self.sys.refresh_memory();
        let total = self.sys.total_memory();
        if total == 0 {
            return Err(MeterError::Unavailable("total memory reported as 0".into()));
        }
        let cpu = self.sys.global_cpu_usage() as f64;
        if !cpu.is_finite() {
            return Err(MeterError::Unavailable("cpu usage is not a number".into()));
        }
        let mem = self.sys.used_memory() as f64 / total as f64 * 100.0;
        Ok((cpu, mem))
    }
}

/// Builds a sample for `device_id`; the ledger assigns the timestamp.
pub fn sample_resources(
    device_id: &str,
    meter: &mut dyn ResourceMeter,
    workloads: &dyn WorkloadCounter,
) -> Result<ResourceSample, MeterError> {
    let (cpu, mem) = meter.read()?;
    Ok(ResourceSample {
        device_id: device_id.to_string(),
        timestamp_ms: 0,
        cpu_percent: cpu.clamp(0.0, 100.0),
        memory_percent: mem.clamp(0.0, 100.0),
        container_count: workloads.count(),
    })
}
