use crate::ledger::{Contract, ContractError, OpKind, TxContext};

use super::analysis::{combine, rank};
use super::inventory::server_list;
use super::latency::latency_analysis;
use super::ops::*;
use super::resource::resource_analysis;
use super::{
    arg, expect_arity, from_json, load_device, now_arg, to_json, window_arg, Role,
    SelectionEntry, TaskProperties,
};

/// Picks the edge server to offload a sensor's task to.
pub struct OffloadSelection;

impl Contract for OffloadSelection {
    fn name(&self) -> &'static str {
        super::OFFLOAD
    }

    fn op_kind(&self, operation: &str) -> Option<OpKind> {
        (operation == SELECT_OFFLOAD_SERVER).then_some(OpKind::Read)
    }

    /// Args: `targetId`, task properties JSON, `windowMinutes`, `nowMs`.
    fn invoke(
        &self,
        operation: &str,
        args: &[String],
        ctx: &mut TxContext<'_>,
    ) -> Result<Vec<u8>, ContractError> {
        if operation != SELECT_OFFLOAD_SERVER {
            return Err(ContractError::Invalid(format!("unknown operation {operation}")));
        }
        expect_arity(args, 4)?;
        let target = arg(args, 0, "targetId")?;
        let task: TaskProperties = from_json("task properties", &args[1])?;
        let window = window_arg(args, 2)?;
        let now = now_arg(args, 3)?;
        Ok(to_json(&select_offload_server(ctx, target, &task, window, now)?))
    }
}

pub(crate) fn select_offload_server(
    ctx: &TxContext<'_>,
    target_id: &str,
    task: &TaskProperties,
    window_minutes: u32,
    now_ms: i64,
) -> Result<Vec<SelectionEntry>, ContractError> {
    let target = load_device(ctx, target_id)?;
    if target.role != Role::Sensor {
        return Err(ContractError::Invalid(format!(
            "target {target_id} is not a sensor"
        )));
    }
    let latency = latency_analysis(ctx, target_id, window_minutes, now_ms)?;

    let mut resources = Vec::new();
    for server in server_list(ctx, task.requires_gpu) {
        // only servers that measured the target inside the window
        if latency.for_server(&server.id).is_none() {
            continue;
        }
        let r = resource_analysis(ctx, &server.id, window_minutes, now_ms)?;
        if r.sample_count > 0 {
            resources.push(r);
        }
    }

    let mut entries = combine(&resources, &latency);
    rank(&mut entries);
    if entries.is_empty() {
        return Err(ContractError::NoEligibleServer(format!(
            "no server has in-window latency and resource data for {target_id}"
        )));
    }
    Ok(entries)
}
