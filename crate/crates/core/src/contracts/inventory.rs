use crate::ledger::{Contract, ContractError, OpKind, TxContext};

use super::ops::*;
use super::{arg, expect_arity, from_json, keys, load_device, scan, to_json, DeviceRecord, Role};

/// Device inventory: CRUD plus the server/sensor filters used by selection.
pub struct Inventory;

impl Contract for Inventory {
    fn name(&self) -> &'static str {
        super::INVENTORY
    }

    fn op_kind(&self, operation: &str) -> Option<OpKind> {
        match operation {
            CREATE_DEVICE | UPDATE_DEVICE | DELETE_DEVICE => Some(OpKind::Write),
            READ_DEVICE | LIST_DEVICES | GET_SERVER_LIST | GET_SERVER_LIST_GPU
            | GET_SENSOR_LIST => Some(OpKind::Read),
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
            CREATE_DEVICE => {
                expect_arity(args, 1)?;
                let d: DeviceRecord = from_json("device", &args[0])?;
                d.validate()?;
                let key = keys::device(&d.id);
                if ctx.get(&key).is_some() {
                    return Err(ContractError::Duplicate(format!("device {}", d.id)));
                }
                ctx.put(key, to_json(&d));
                Ok(to_json(&d.id))
            }
            READ_DEVICE => {
                expect_arity(args, 1)?;
                Ok(to_json(&load_device(ctx, arg(args, 0, "id")?)?))
            }
            UPDATE_DEVICE => {
                expect_arity(args, 1)?;
                let d: DeviceRecord = from_json("device", &args[0])?;
                d.validate()?;
                load_device(ctx, &d.id)?;
                ctx.put(keys::device(&d.id), to_json(&d));
                Ok(to_json(&d))
            }
            DELETE_DEVICE => {
                expect_arity(args, 1)?;
                let id = arg(args, 0, "id")?;
                load_device(ctx, id)?;
                ctx.delete(keys::device(id));
                Ok(to_json(&id))
            }
            LIST_DEVICES => {
                expect_arity(args, 0)?;
                Ok(to_json(&all_devices(ctx)))
            }
            GET_SERVER_LIST => {
                expect_arity(args, 0)?;
                Ok(to_json(&server_list(ctx, false)))
            }
            GET_SERVER_LIST_GPU => {
                expect_arity(args, 0)?;
                Ok(to_json(&server_list(ctx, true)))
            }
            GET_SENSOR_LIST => {
                expect_arity(args, 0)?;
                Ok(to_json(&sensor_list(ctx)))
            }
            other => Err(ContractError::Invalid(format!("unknown operation {other}"))),
        }
    }
}

/// Ascending by id (the key order).
fn all_devices(ctx: &TxContext<'_>) -> Vec<DeviceRecord> {
    scan(ctx, keys::DEVICE_PREFIX)
}

/// Active edge servers ascending by id, optionally only those with a GPU.
pub(crate) fn server_list(ctx: &TxContext<'_>, gpu_only: bool) -> Vec<DeviceRecord> {
    all_devices(ctx)
        .into_iter()
        .filter(|d| d.active && d.role == Role::EdgeServer && (!gpu_only || d.has_gpu))
        .collect()
}

pub(crate) fn sensor_list(ctx: &TxContext<'_>) -> Vec<DeviceRecord> {
    all_devices(ctx)
        .into_iter()
        .filter(|d| d.active && d.role == Role::Sensor)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Write, WorldState};

    fn dev(id: &str, role: Role, gpu: bool) -> DeviceRecord {
        DeviceRecord {
            id: id.into(),
            name: id.to_uppercase(),
            role,
            has_gpu: gpu,
            address: format!("{id}.local:22"),
            credential_ref: format!("cred-{id}"),
            active: true,
        }
    }

    fn call(state: &mut WorldState, op: &str, args: &[String]) -> Result<Vec<u8>, ContractError> {
        let mut ctx = TxContext::new("tx", 0, state);
        let out = Inventory.invoke(op, args, &mut ctx)?;
        let writes: Vec<Write> = ctx.into_writes();
        state.apply_writes(&writes);
        Ok(out)
    }

    fn lab_inventory() -> WorldState {
        let mut s = WorldState::new();
        for d in [
            dev("hfn", Role::EdgeServer, true),
            dev("upboard", Role::EdgeServer, false),
            dev("rpi3", Role::EdgeServer, false),
            dev("rpi4", Role::Sensor, false),
        ] {
            call(&mut s, CREATE_DEVICE, &[serde_json::to_string(&d).unwrap()]).unwrap();
        }
        s
    }

    fn ids(raw: Vec<u8>) -> Vec<String> {
        let v: Vec<DeviceRecord> = serde_json::from_slice(&raw).unwrap();
        v.into_iter().map(|d| d.id).collect()
    }

    #[test]
    fn server_lists_follow_roles_and_gpu() {
        let mut s = lab_inventory();
        assert_eq!(ids(call(&mut s, GET_SERVER_LIST, &[]).unwrap()), ["hfn", "rpi3", "upboard"]);
        assert_eq!(ids(call(&mut s, GET_SERVER_LIST_GPU, &[]).unwrap()), ["hfn"]);
        assert_eq!(ids(call(&mut s, GET_SENSOR_LIST, &[]).unwrap()), ["rpi4"]);
        let mut empty = WorldState::new();
        assert!(ids(call(&mut empty, GET_SERVER_LIST, &[]).unwrap()).is_empty());
    }

    #[test]
    fn inactive_servers_are_not_listed() {
        let mut s = lab_inventory();
        let mut d = dev("rpi3", Role::EdgeServer, false);
        d.active = false;
        call(&mut s, UPDATE_DEVICE, &[serde_json::to_string(&d).unwrap()]).unwrap();
        assert_eq!(ids(call(&mut s, GET_SERVER_LIST, &[]).unwrap()), ["hfn", "upboard"]);
    }

    #[test]
    fn crud_round_trip_and_errors() {
        let mut s = WorldState::new();
        let d = dev("upboard", Role::EdgeServer, false);
        let json = serde_json::to_string(&d).unwrap();
        call(&mut s, CREATE_DEVICE, std::slice::from_ref(&json)).unwrap();
        let back: DeviceRecord =
            serde_json::from_slice(&call(&mut s, READ_DEVICE, &["upboard".into()]).unwrap()).unwrap();
        assert_eq!(back, d);
        assert!(matches!(
            call(&mut s, CREATE_DEVICE, &[json]),
            Err(ContractError::Duplicate(_))
        ));
        call(&mut s, DELETE_DEVICE, &["upboard".into()]).unwrap();
        assert!(matches!(
            call(&mut s, READ_DEVICE, &["upboard".into()]),
            Err(ContractError::NotFound(_))
        ));
        assert!(matches!(
            call(&mut s, DELETE_DEVICE, &["upboard".into()]),
            Err(ContractError::NotFound(_))
        ));
        let ghost = serde_json::to_string(&dev("ghost", Role::Sensor, false)).unwrap();
        assert!(matches!(
            call(&mut s, UPDATE_DEVICE, &[ghost]),
            Err(ContractError::NotFound(_))
        ));
    }

    #[test]
    fn malformed_devices_are_rejected() {
        let mut s = WorldState::new();
        let mut d = dev("x", Role::Sensor, false);
        d.address = "no-port".into();
        assert!(matches!(
            call(&mut s, CREATE_DEVICE, &[serde_json::to_string(&d).unwrap()]),
            Err(ContractError::Invalid(_))
        ));
        assert!(call(&mut s, CREATE_DEVICE, &["{not json".into()]).is_err());
        assert!(call(&mut s, CREATE_DEVICE, &[]).is_err());
        assert!(s.is_empty());
    }
}
