//! The four smart contracts: device inventory, resource history, latency
//! history and offload server selection.
//!
//! Contracts take string arguments (JSON for structured values) and return
//! JSON bytes. They read the clock only through the transaction context, so
//! their effects are a pure function of world state and arguments.

pub mod analysis;
mod inventory;
pub mod keys;
mod latency;
mod offload;
mod resource;
pub mod types;

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ledger::{ContractError, ContractRegistry, TxContext};

pub use inventory::Inventory;
pub use latency::LatencyCollection;
pub use offload::OffloadSelection;
pub use resource::ResourceCollection;
pub use types::*;

pub const INVENTORY: &str = "inventory";
pub const RESOURCE: &str = "resource";
pub const LATENCY: &str = "latency";
pub const OFFLOAD: &str = "offload";

pub mod ops {
    pub const CREATE_DEVICE: &str = "CreateDevice";
    pub const READ_DEVICE: &str = "ReadDevice";
    pub const UPDATE_DEVICE: &str = "UpdateDevice";
    pub const DELETE_DEVICE: &str = "DeleteDevice";
    pub const LIST_DEVICES: &str = "ListDevices";
    pub const GET_SERVER_LIST: &str = "GetServerList";
    pub const GET_SERVER_LIST_GPU: &str = "GetServerListGPU";
    pub const GET_SENSOR_LIST: &str = "GetSensorList";
    pub const PUT_RESOURCE_SAMPLE: &str = "PutResourceSample";
    pub const ANALYSE_RESOURCES: &str = "AnalyseResources";
    pub const GET_RESOURCE_HISTORY: &str = "GetResourceHistory";
    pub const PUT_LATENCY_MEASUREMENTS: &str = "PutLatencyMeasurements";
    pub const ANALYSE_LATENCY_TO_TARGET: &str = "AnalyseLatencyToTarget";
    pub const GET_LATENCY_HISTORY: &str = "GetLatencyHistory";
    pub const SELECT_OFFLOAD_SERVER: &str = "SelectOffloadServer";
}

/// Registry holding all four contracts.
pub fn default_registry() -> ContractRegistry {
    let mut r = ContractRegistry::new();
    r.register(Arc::new(Inventory))
        .register(Arc::new(ResourceCollection))
        .register(Arc::new(LatencyCollection))
        .register(Arc::new(OffloadSelection));
    r
}

pub(crate) fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("contract values serialize")
}

pub(crate) fn from_json<T: DeserializeOwned>(what: &str, raw: &str) -> Result<T, ContractError> {
    serde_json::from_str(raw).map_err(|e| ContractError::Invalid(format!("{what}: {e}")))
}

fn decode_stored<T: DeserializeOwned>(key: &str, raw: &[u8]) -> T {
    // values are only ever written by these contracts
    serde_json::from_slice(raw).unwrap_or_else(|e| panic!("corrupt world-state value at {key}: {e}"))
}

pub(crate) fn arg<'a>(args: &'a [String], i: usize, name: &str) -> Result<&'a str, ContractError> {
    args.get(i)
        .map(String::as_str)
        .ok_or_else(|| ContractError::Invalid(format!("missing argument {name}")))
}

pub(crate) fn expect_arity(args: &[String], n: usize) -> Result<(), ContractError> {
    if args.len() != n {
        return Err(ContractError::Invalid(format!(
            "expected {n} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

pub(crate) fn window_arg(args: &[String], i: usize) -> Result<u32, ContractError> {
    let raw = arg(args, i, "windowMinutes")?;
    match raw.parse::<u32>() {
        Ok(w) if w > 0 => Ok(w),
        _ => Err(ContractError::Invalid(format!(
            "windowMinutes must be a positive integer, got {raw:?}"
        ))),
    }
}

pub(crate) fn now_arg(args: &[String], i: usize) -> Result<i64, ContractError> {
    let raw = arg(args, i, "nowMs")?;
    raw.parse()
        .map_err(|_| ContractError::Invalid(format!("nowMs must be an integer, got {raw:?}")))
}

pub(crate) fn load_device(ctx: &TxContext<'_>, id: &str) -> Result<DeviceRecord, ContractError> {
    let key = keys::device(id);
    ctx.get(&key)
        .map(|raw| decode_stored(&key, &raw))
        .ok_or_else(|| ContractError::NotFound(format!("device {id}")))
}

pub(crate) fn scan<T: DeserializeOwned>(ctx: &TxContext<'_>, prefix: &str) -> Vec<T> {
    ctx.range(prefix)
        .into_iter()
        .map(|(k, v)| decode_stored(&k, &v))
        .collect()
}
