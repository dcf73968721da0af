#![allow(dead_code)]

use std::sync::Arc;

use edgeledger::clock::ManualClock;
use edgeledger::contracts::{
    self, ops, DeviceRecord, LatencyRecord, ResourceSample, Role, SelectionEntry, TaskProperties,
};
use edgeledger::ledger::{Ledger, LedgerConfig, LedgerError};

/// Ledger that only cuts blocks on request, on a clock the test drives.
pub fn manual_ledger() -> (Ledger, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(1_000_000_000));
    let ledger = Ledger::open(LedgerConfig::manual(), contracts::default_registry(), clock.clone()).unwrap();
    (ledger, clock)
}

pub fn device(id: &str, role: Role) -> DeviceRecord {
    DeviceRecord {
        id: id.into(),
        name: id.to_uppercase(),
        role,
        has_gpu: false,
        address: format!("{id}.local:22"),
        credential_ref: format!("cred-{id}"),
        active: true,
    }
}

pub fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap()
}

/// Executes one transaction and commits it in its own block.
pub fn commit(ledger: &Ledger, contract: &str, op: &str, args: Vec<String>) -> Result<Vec<u8>, LedgerError> {
    let r = ledger.enqueue(contract, op, &args)?;
    ledger.cut_block()?;
    Ok(r.result)
}

pub fn add_device(ledger: &Ledger, d: &DeviceRecord) {
    commit(ledger, contracts::INVENTORY, ops::CREATE_DEVICE, vec![json(d)]).unwrap();
}

pub fn add_resource(ledger: &Ledger, clock: &ManualClock, ts: i64, id: &str, cpu: f64, mem: f64, containers: u32) {
    clock.set(ts);
    let s = ResourceSample {
        device_id: id.into(),
        timestamp_ms: 0,
        cpu_percent: cpu,
        memory_percent: mem,
        container_count: containers,
    };
    commit(ledger, contracts::RESOURCE, ops::PUT_RESOURCE_SAMPLE, vec![json(&s)]).unwrap();
}

pub fn add_latency(ledger: &Ledger, clock: &ManualClock, ts: i64, source: &str, target: &str, ms: i64) {
    clock.set(ts);
    let r = LatencyRecord {
        source_id: source.into(),
        target_id: target.into(),
        timestamp_ms: 0,
        latency_ms: ms,
    };
    commit(ledger, contracts::LATENCY, ops::PUT_LATENCY_MEASUREMENTS, vec![json(&vec![r])]).unwrap();
}

pub fn select(ledger: &Ledger, target: &str, window: u32, now: i64) -> Result<Vec<SelectionEntry>, LedgerError> {
    let raw = ledger.evaluate(
        contracts::OFFLOAD,
        ops::SELECT_OFFLOAD_SERVER,
        &[target.into(), json(&TaskProperties::default()), window.to_string(), now.to_string()],
    )?;
    Ok(serde_json::from_slice(&raw).unwrap())
}

pub const MINUTE: i64 = 60_000;

/// Three-server Ethernet lab and one in-window sample per server at the lab's
/// values, evaluated at `now`.
pub fn ethernet_lab_ledger(now: i64) -> (Ledger, Arc<ManualClock>) {
    let (ledger, clock) = manual_ledger();
    add_device(&ledger, &device("rpi4", Role::Sensor));
    for (id, lat, cpu, mem) in [
        ("hfn", 274.40, 4.97, 29.13),
        ("upboard", 273.08, 2.08, 9.39),
        ("rpi3", 280.80, 4.88, 14.36),
    ] {
        add_device(&ledger, &device(id, Role::EdgeServer));
        add_resource(&ledger, &clock, now - MINUTE, id, cpu, mem, 0);
        // 25 integer probes whose mean is the target value exactly
        let total = (lat * 25.0_f64).round() as i64;
        for k in 0..25 {
            let ms = total / 25 + i64::from(k < total % 25);
            add_latency(&ledger, &clock, now - 2 * MINUTE + k, id, "rpi4", ms);
        }
    }
    clock.set(now);
    (ledger, clock)
}

/// Builds a ledger with at least `min_blocks` non-genesis blocks of mixed
/// inventory, resource and latency transactions drawn from `seed`.
pub fn random_chain(seed: u64, min_blocks: u64) -> Ledger {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (ledger, clock) = manual_ledger();
    let servers = ["s0", "s1", "s2", "s3"];
    commit(&ledger, contracts::INVENTORY, ops::CREATE_DEVICE, vec![json(&device("t0", Role::Sensor))]).unwrap();
    let mut created: Vec<&str> = Vec::new();
    let mut ts = 1_000_000_000;
    while ledger.height() < min_blocks {
        for _ in 0..rng.random_range(1..=4) {
            ts += rng.random_range(0..5_000);
            clock.set(ts);
            let pick = rng.random_range(0..10);
            let args;
            let (c, op) = if created.len() < servers.len() && (created.is_empty() || pick == 0) {
                let id = servers[created.len()];
                created.push(id);
                let mut d = device(id, Role::EdgeServer);
                d.has_gpu = rng.random_bool(0.5);
                args = vec![json(&d)];
                (contracts::INVENTORY, ops::CREATE_DEVICE)
            } else if pick < 5 {
                let s = ResourceSample {
                    device_id: created[rng.random_range(0..created.len())].into(),
                    timestamp_ms: 0,
                    cpu_percent: rng.random_range(0.0..100.0),
                    memory_percent: rng.random_range(0.0..100.0),
                    container_count: rng.random_range(0..8),
                };
                args = vec![json(&s)];
                (contracts::RESOURCE, ops::PUT_RESOURCE_SAMPLE)
            } else {
                let mut batch = Vec::new();
                for src in &created {
                    if rng.random_bool(0.7) {
                        batch.push(LatencyRecord {
                            source_id: src.to_string(),
                            target_id: "t0".into(),
                            timestamp_ms: 0,
                            latency_ms: if rng.random_bool(0.1) { -1 } else { rng.random_range(0..2_000) },
                        });
                    }
                }
                args = vec![json(&batch)];
                (contracts::LATENCY, ops::PUT_LATENCY_MEASUREMENTS)
            };
            ledger.enqueue(c, op, &args).unwrap();
        }
        ledger.cut_block().unwrap();
    }
    ledger
}

/// A ledger filled with random records plus the raw values that went in,
/// for checking contract output against independent recomputation.
pub struct RandomWorld {
    pub ledger: Ledger,
    pub now: i64,
    pub window: u32,
    pub target: String,
    pub servers: Vec<DeviceRecord>,
    /// (timestamp, source, latency)
    pub latency: Vec<(i64, String, i64)>,
    /// (timestamp, device, cpu, mem, containers)
    pub resources: Vec<(i64, String, f64, f64, u32)>,
}

/// `ties` draws values from tiny sets so that equal keys are common.
pub fn random_world(rng: &mut impl rand::Rng, ties: bool) -> RandomWorld {
    use rand::Rng;
    let (ledger, clock) = manual_ledger();
    let window: u32 = rng.random_range(1..=15);
    let now: i64 = 10_000_000_000 + rng.random_range(0..1_000_000);
    let w = window as i64 * MINUTE;
    let target = "t0".to_string();
    add_device(&ledger, &device(&target, Role::Sensor));
    // a second sensor whose records must not leak into t0's analysis
    add_device(&ledger, &device("t1", Role::Sensor));

    let n = rng.random_range(1..=6);
    let mut servers = Vec::new();
    for i in 0..n {
        let mut d = device(&format!("s{i}"), Role::EdgeServer);
        d.has_gpu = rng.random_bool(0.5);
        add_device(&ledger, &d);
        servers.push(d);
    }
    let ts_for = |rng: &mut dyn rand::RngCore| -> i64 {
        match rng.random_range(0..10) {
            0 => now - w,         // lower bound, inside
            1 => now - w - 1,     // just outside
            2 => now,             // upper bound, inside
            3 => now + rng.random_range(1..10_000), // future
            4 => now - w - rng.random_range(1..10 * MINUTE),
            _ => now - rng.random_range(0..=w),
        }
    };

    let mut latency = Vec::new();
    let mut resources = Vec::new();
    for d in &servers {
        for _ in 0..rng.random_range(0..5) {
            let ts = ts_for(rng);
            let (cpu, mem, c) = if ties {
                (
                    [1.0, 2.0][rng.random_range(0..2)],
                    [10.0, 20.0][rng.random_range(0..2)],
                    rng.random_range(0..2),
                )
            } else {
                (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), rng.random_range(0..20))
            };
            add_resource(&ledger, &clock, ts, &d.id, cpu, mem, c);
            resources.push((ts, d.id.clone(), cpu, mem, c));
        }
        for _ in 0..rng.random_range(0..6) {
            let ts = ts_for(rng);
            let ms = if rng.random_bool(0.2) {
                -1
            } else if ties {
                [100, 101][rng.random_range(0..2)]
            } else {
                rng.random_range(0..5_000)
            };
            add_latency(&ledger, &clock, ts, &d.id, &target, ms);
            latency.push((ts, d.id.clone(), ms));
        }
        if rng.random_bool(0.3) {
            add_latency(&ledger, &clock, now, &d.id, "t1", rng.random_range(0..5_000));
        }
    }
    clock.set(now);
    RandomWorld { ledger, now, window, target, servers, latency, resources }
}

impl RandomWorld {
    pub fn in_window(&self, ts: i64) -> bool {
        self.now - self.window as i64 * MINUTE <= ts && ts <= self.now
    }

    pub fn latency_oracle(&self, server: &str) -> Option<(f64, u64)> {
        let v: Vec<i64> = self
            .latency
            .iter()
            .filter(|(ts, s, ms)| s == server && *ms >= 0 && self.in_window(*ts))
            .map(|r| r.2)
            .collect();
        (!v.is_empty()).then(|| (v.iter().sum::<i64>() as f64 / v.len() as f64, v.len() as u64))
    }

    /// (cpu, mem, containers, count)
    pub fn resource_oracle(&self, server: &str) -> Option<(f64, f64, f64, u64)> {
        let v: Vec<_> = self
            .resources
            .iter()
            .filter(|r| r.1 == server && self.in_window(r.0))
            .collect();
        let n = v.len() as f64;
        (!v.is_empty()).then(|| {
            (
                v.iter().map(|r| r.2).sum::<f64>() / n,
                v.iter().map(|r| r.3).sum::<f64>() / n,
                v.iter().map(|r| r.4 as f64).sum::<f64>() / n,
                v.len() as u64,
            )
        })
    }

    /// Eligible servers sorted by an explicit tuple comparison.
    pub fn selection_oracle(&self, gpu_only: bool) -> Vec<SelectionEntry> {
        let mut out: Vec<SelectionEntry> = self
            .servers
            .iter()
            .filter(|d| !gpu_only || d.has_gpu)
            .filter_map(|d| {
                let (lat, _) = self.latency_oracle(&d.id)?;
                let (cpu, mem, c, _) = self.resource_oracle(&d.id)?;
                Some(SelectionEntry {
                    server_id: d.id.clone(),
                    avg_latency_ms: lat,
                    avg_cpu: cpu,
                    avg_memory: mem,
                    avg_containers: c,
                })
            })
            .collect();
        // plain exchange sort on the key tuple
        let key = |e: &SelectionEntry| (e.avg_latency_ms, e.avg_cpu, e.avg_memory, e.avg_containers, e.server_id.clone());
        for i in 0..out.len() {
            for j in 0..out.len() - 1 - i {
                if key(&out[j]).partial_cmp(&key(&out[j + 1])) == Some(std::cmp::Ordering::Greater) {
                    out.swap(j, j + 1);
                }
            }
        }
        out
    }

    pub fn select(&self, gpu_only: bool) -> Result<Vec<SelectionEntry>, LedgerError> {
        let task = TaskProperties { requires_gpu: gpu_only, label: String::new() };
        let raw = self.ledger.evaluate(
            contracts::OFFLOAD,
            ops::SELECT_OFFLOAD_SERVER,
            &[self.target.clone(), json(&task), self.window.to_string(), self.now.to_string()],
        )?;
        Ok(serde_json::from_slice(&raw).unwrap())
    }
}

pub fn rel_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Same servers in the same order, values within 1e-9 relative.
pub fn same_ranking(got: &[SelectionEntry], want: &[SelectionEntry]) -> Result<(), String> {
    let ids = |v: &[SelectionEntry]| v.iter().map(|e| e.server_id.clone()).collect::<Vec<_>>();
    if ids(got) != ids(want) {
        return Err(format!("order {:?} != {:?}", ids(got), ids(want)));
    }
    for (g, w) in got.iter().zip(want) {
        for (a, b) in [
            (g.avg_latency_ms, w.avg_latency_ms),
            (g.avg_cpu, w.avg_cpu),
            (g.avg_memory, w.avg_memory),
            (g.avg_containers, w.avg_containers),
        ] {
            if !rel_close(a, b) {
                return Err(format!("{}: {a} != {b}", g.server_id));
            }
        }
    }
    Ok(())
}
