//! Windowed averages and the selection ranking. Pure functions over records;
//! the contracts feed them from the world state.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::types::{
    LatencyAnalysis, LatencyRecord, ResourceAnalysis, ResourceSample, SelectionEntry,
    ServerLatency,
};

const MS_PER_MINUTE: i64 = 60_000;

/// Closed window `[now - minutes, now]` in milliseconds.
pub fn window_bounds(window_minutes: u32, now_ms: i64) -> (i64, i64) {
    (now_ms.saturating_sub(window_minutes as i64 * MS_PER_MINUTE), now_ms)
}

fn in_window(ts: i64, (lo, hi): (i64, i64)) -> bool {
    lo <= ts && ts <= hi
}

pub fn analyse_resources<'a>(
    device_id: &str,
    samples: impl IntoIterator<Item = &'a ResourceSample>,
    window_minutes: u32,
    now_ms: i64,
) -> ResourceAnalysis {
    let bounds = window_bounds(window_minutes, now_ms);
    let (mut cpu, mut mem, mut containers, mut n) = (0.0, 0.0, 0.0, 0u64);
    for s in samples {
        if s.device_id == device_id && in_window(s.timestamp_ms, bounds) {
            cpu += s.cpu_percent;
            mem += s.memory_percent;
            containers += s.container_count as f64;
            n += 1;
        }
    }
    let mean = |sum: f64| (n > 0).then(|| sum / n as f64);
    ResourceAnalysis {
        device_id: device_id.to_string(),
        window_minutes,
        avg_cpu: mean(cpu),
        avg_memory: mean(mem),
        avg_containers: mean(containers),
        sample_count: n,
    }
}

/// Failed probes are skipped; servers with no successful in-window
/// measurement do not appear.
pub fn analyse_latency<'a>(
    target_id: &str,
    records: impl IntoIterator<Item = &'a LatencyRecord>,
    window_minutes: u32,
    now_ms: i64,
) -> LatencyAnalysis {
    let bounds = window_bounds(window_minutes, now_ms);
    let mut acc: BTreeMap<&str, (i64, u64)> = BTreeMap::new();
    for r in records {
        if r.target_id == target_id && r.succeeded() && in_window(r.timestamp_ms, bounds) {
            let e = acc.entry(r.source_id.as_str()).or_default();
            e.0 += r.latency_ms;
            e.1 += 1;
        }
    }
    LatencyAnalysis {
        target_id: target_id.to_string(),
        window_minutes,
        per_server: acc
            .into_iter()
            .map(|(id, (sum, n))| ServerLatency {
                source_id: id.to_string(),
                avg_latency_ms: sum as f64 / n as f64,
                sample_count: n,
            })
            .collect(),
    }
}

/// Joins per-server resource and latency analyses. Servers missing from
/// either side, or without resource samples, are left out.
pub fn combine(resources: &[ResourceAnalysis], latency: &LatencyAnalysis) -> Vec<SelectionEntry> {
    resources
        .iter()
        .filter_map(|r| {
            let l = latency.for_server(&r.device_id)?;
            Some(SelectionEntry {
                server_id: r.device_id.clone(),
                avg_latency_ms: l.avg_latency_ms,
                avg_cpu: r.avg_cpu?,
                avg_memory: r.avg_memory?,
                avg_containers: r.avg_containers?,
            })
        })
        .collect()
}

/// Ascending by latency, then CPU, memory, containers, and finally server id.
pub fn compare_entries(a: &SelectionEntry, b: &SelectionEntry) -> Ordering {
    a.avg_latency_ms
        .total_cmp(&b.avg_latency_ms)
        .then(a.avg_cpu.total_cmp(&b.avg_cpu))
        .then(a.avg_memory.total_cmp(&b.avg_memory))
        .then(a.avg_containers.total_cmp(&b.avg_containers))
        .then_with(|| a.server_id.cmp(&b.server_id))
}

pub fn rank(entries: &mut [SelectionEntry]) {
    entries.sort_by(compare_entries);
}
