use std::collections::HashSet;

use crate::ledger::{Contract, ContractError, OpKind, TxContext};

use super::analysis::analyse_latency;
use super::ops::*;
use super::{
    arg, expect_arity, from_json, keys, load_device, now_arg, scan, to_json, window_arg,
    LatencyAnalysis, LatencyRecord,
};

/// Append-only history of probe round trips, keyed by target.
pub struct LatencyCollection;

impl Contract for LatencyCollection {
    fn name(&self) -> &'static str {
        super::LATENCY
    }

    fn op_kind(&self, operation: &str) -> Option<OpKind> {
        match operation {
            PUT_LATENCY_MEASUREMENTS => Some(OpKind::Write),
            ANALYSE_LATENCY_TO_TARGET | GET_LATENCY_HISTORY => Some(OpKind::Read),
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
            PUT_LATENCY_MEASUREMENTS => {
                expect_arity(args, 1)?;
                let batch: Vec<LatencyRecord> = from_json("latency batch", &args[0])?;
                // validate everything before the first write so a bad record
                // rejects the whole batch
                let mut pairs = HashSet::new();
                for r in &batch {
                    r.validate()?;
                    load_device(ctx, &r.source_id)?;
                    load_device(ctx, &r.target_id)?;
                    if !pairs.insert((r.source_id.as_str(), r.target_id.as_str())) {
                        return Err(ContractError::Invalid(format!(
                            "batch repeats the pair {} -> {}",
                            r.source_id, r.target_id
                        )));
                    }
                }
                let ts = ctx.timestamp_ms();
                let tx_id = ctx.tx_id().to_string();
                for mut r in batch.iter().cloned() {
                    r.timestamp_ms = ts;
                    let key = keys::latency(&r.target_id, &r.source_id, ts, &tx_id);
                    if ctx.get(&key).is_some() {
                        return Err(ContractError::Duplicate(key));
                    }
                    ctx.put(key, to_json(&r));
                }
                Ok(to_json(&batch.len()))
            }
            ANALYSE_LATENCY_TO_TARGET => {
                expect_arity(args, 3)?;
                let target = arg(args, 0, "targetId")?;
                let window = window_arg(args, 1)?;
                let now = now_arg(args, 2)?;
                Ok(to_json(&latency_analysis(ctx, target, window, now)?))
            }
            GET_LATENCY_HISTORY => {
                expect_arity(args, 1)?;
                let target = arg(args, 0, "targetId")?;
                load_device(ctx, target)?;
                Ok(to_json(&history(ctx, target)))
            }
            other => Err(ContractError::Invalid(format!("unknown operation {other}"))),
        }
    }
}

fn history(ctx: &TxContext<'_>, target_id: &str) -> Vec<LatencyRecord> {
    scan(ctx, &keys::latency_prefix(target_id))
}

pub(crate) fn latency_analysis(
    ctx: &TxContext<'_>,
    target_id: &str,
    window_minutes: u32,
    now_ms: i64,
) -> Result<LatencyAnalysis, ContractError> {
    load_device(ctx, target_id)?;
    Ok(analyse_latency(
        target_id,
        &history(ctx, target_id),
        window_minutes,
        now_ms,
    ))
}
