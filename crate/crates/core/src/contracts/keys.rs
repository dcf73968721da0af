//! World-state key schema.
//!
//! ```text
//! device:{id}
//! resource:{deviceId}:{timestampMs:020}:{txId}
//! latency:{targetId}:{sourceId}:{timestampMs:020}:{txId}
//! ```

pub const DEVICE_PREFIX: &str = "device:";
pub const RESOURCE_PREFIX: &str = "resource:";
pub const LATENCY_PREFIX: &str = "latency:";

pub fn device(id: &str) -> String {
    format!("{DEVICE_PREFIX}{id}")
}

pub fn resource(device_id: &str, timestamp_ms: i64, tx_id: &str) -> String {
    format!("{RESOURCE_PREFIX}{device_id}:{timestamp_ms:020}:{tx_id}")
}

pub fn resource_prefix(device_id: &str) -> String {
    format!("{RESOURCE_PREFIX}{device_id}:")
}

pub fn latency(target_id: &str, source_id: &str, timestamp_ms: i64, tx_id: &str) -> String {
    format!("{LATENCY_PREFIX}{target_id}:{source_id}:{timestamp_ms:020}:{tx_id}")
}

pub fn latency_prefix(target_id: &str) -> String {
    format!("{LATENCY_PREFIX}{target_id}:")
}
