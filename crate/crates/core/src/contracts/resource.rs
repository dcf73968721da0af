use crate::ledger::{Contract, ContractError, OpKind, TxContext};

use super::analysis::analyse_resources;
use super::ops::*;
use super::{
    arg, expect_arity, from_json, keys, load_device, now_arg, scan, to_json, window_arg,
    ResourceAnalysis, ResourceSample,
};

/// Append-only history of device resource samples.
pub struct ResourceCollection;

impl Contract for ResourceCollection {
    fn name(&self) -> &'static str {
        super::RESOURCE
    }

    fn op_kind(&self, operation: &str) -> Option<OpKind> {
        match operation {
            PUT_RESOURCE_SAMPLE => Some(OpKind::Write),
            ANALYSE_RESOURCES | GET_RESOURCE_HISTORY => Some(OpKind::Read),
            _ => None,
        }
    }

    fn invoke(
        &self,
        operation: &str,
        args: &[String],
        ctx: &mut TxContext<'_>,
    ) -> Result<Vec<u8>, ContractError> {
        match operation {
            PUT_RESOURCE_SAMPLE => {
                expect_arity(args, 1)?;
                let mut s: ResourceSample = from_json("resource sample", &args[0])?;
                s.validate()?;
                load_device(ctx, &s.device_id)?;
                s.timestamp_ms = ctx.timestamp_ms();
                let key = keys::resource(&s.device_id, s.timestamp_ms, ctx.tx_id());
                if ctx.get(&key).is_some() {
                    return Err(ContractError::Duplicate(key));
                }
                ctx.put(key.clone(), to_json(&s));
                Ok(to_json(&key))
            }
            ANALYSE_RESOURCES => {
                expect_arity(args, 3)?;
                let id = arg(args, 0, "deviceId")?;
                let window = window_arg(args, 1)?;
                let now = now_arg(args, 2)?;
                Ok(to_json(&resource_analysis(ctx, id, window, now)?))
            }
            GET_RESOURCE_HISTORY => {
                expect_arity(args, 1)?;
                let id = arg(args, 0, "deviceId")?;
                load_device(ctx, id)?;
                Ok(to_json(&history(ctx, id)))
            }
            other => Err(ContractError::Invalid(format!("unknown operation {other}"))),
        }
    }
}

fn history(ctx: &TxContext<'_>, device_id: &str) -> Vec<ResourceSample> {
    scan(ctx, &keys::resource_prefix(device_id))
}

pub(crate) fn resource_analysis(
    ctx: &TxContext<'_>,
    device_id: &str,
    window_minutes: u32,
    now_ms: i64,
) -> Result<ResourceAnalysis, ContractError> {
    load_device(ctx, device_id)?;
    Ok(analyse_resources(
        device_id,
        &history(ctx, device_id),
        window_minutes,
        now_ms,
    ))
}
