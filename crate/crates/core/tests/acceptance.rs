//! Acceptance run. Criteria go one at a time so the timing-sensitive
//! scenario replays do not compete for CPU; each prints one PASS/FAIL line.

mod common;

use std::panic::AssertUnwindSafe;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use edgeledger::contracts::{self, ops, LatencyAnalysis, ResourceAnalysis, Role};
use edgeledger::daemon::{EchoServer, FixedDelay, LinkEffect, LinkModel, ProbeTarget, Prober};
use edgeledger::gateway::{self, GatewayClient};
use edgeledger::ledger::{self, reexecute, verify_records, ContractError, Ledger, LedgerConfig, LedgerError, WorldState};
use edgeledger::sim::{self, ScenarioReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn replay(name: &str) -> Result<(ScenarioReport, Duration), String> {
    let start = Instant::now();
    let report = sim::run_scenario_file(fixture(&format!("{name}.toml"))).map_err(|e| e.to_string())?;
    Ok((report, start.elapsed()))
}

fn mean(r: &ScenarioReport, id: &str) -> Result<f64, String> {
    r.server(id)
        .and_then(|s| s.mean_latency_ms)
        .ok_or_else(|| format!("{id} has no in-window latency"))
}

fn within_ten_percent(r: &ScenarioReport, want: &[(&str, f64)]) -> Result<String, String> {
    let mut parts = Vec::new();
    for &(id, target) in want {
        let got = mean(r, id)?;
        let close = (got - target).abs() <= 0.1 * target;
        ensure!(close, "{id} mean {got:.2} ms outside 10% of {target}");
        parts.push(format!("{id}={got:.2}"));
    }
    Ok(parts.join(" "))
}

fn winner_name(r: &ScenarioReport) -> Option<&str> {
    let id = r.selected_server_id.as_deref()?;
    r.server(id).map(|s| s.name.as_str())
}

fn exp1() -> Outcome {
    let (r, took) = replay("exp1")?;
    ensure!(winner_name(&r) == Some("Up Board"), "selected {:?}", r.selected_server_id);
    let means = within_ten_percent(&r, &[("hfn", 274.40), ("upboard", 273.08), ("rpi3", 280.80)])?;
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("Up Board selected, {means}, {:.1} s", took.as_secs_f64()))
}

fn exp3() -> Outcome {
    let (r, _) = replay("exp3")?;
    ensure!(winner_name(&r) == Some("HFN Server"), "selected {:?}", r.selected_server_id);
    let means = within_ten_percent(&r, &[("hfn", 276.18), ("upboard", 306.62), ("rpi3", 357.07)])?;
    Ok(format!("HFN Server selected, {means}"))
}

fn exp5() -> Outcome {
    let (r, _) = replay("exp5")?;
    let (hfn, up, rpi3) = (mean(&r, "hfn")?, mean(&r, "upboard")?, mean(&r, "rpi3")?);
    ensure!(hfn > 5.0 * up && hfn > 5.0 * rpi3, "hfn {hfn:.2} vs {up:.2}/{rpi3:.2}");
    let argmin = r
        .servers
        .iter()
        .filter_map(|s| s.mean_latency_ms.map(|m| (m, s.server_id.as_str())))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|p| p.1);
    ensure!(r.selected_server_id.as_deref() == argmin, "selected {:?}, argmin {argmin:?}", r.selected_server_id);
    Ok(format!("hfn={hfn:.2} upboard={up:.2} rpi3={rpi3:.2}, selected {}", argmin.unwrap_or("-")))
}

fn selection_order() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0004);
    let (mut entries, mut ties) = (0, 0);
    for case in 0..1000 {
        let w = random_world(&mut rng, true);
        let gpu_only = rng.random_bool(0.2);
        let oracle = w.selection_oracle(gpu_only);
        match w.select(gpu_only) {
            Ok(got) => {
                same_ranking(&got, &oracle).map_err(|e| format!("case {case}: {e}"))?;
                entries += got.len();
                ties += got.windows(2).filter(|p| p[0].avg_latency_ms == p[1].avg_latency_ms).count();
            }
            Err(LedgerError::Rejected(ContractError::NoEligibleServer(_))) => {
                ensure!(oracle.is_empty(), "case {case}: contract found nothing, oracle {}", oracle.len());
            }
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    Ok(format!("1000 sets, {entries} entries, {ties} latency ties, 0 mismatches"))
}

fn analysis() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0005);
    let mut checked = 0;
    for case in 0..1000 {
        let w = random_world(&mut rng, false);
        let window = w.window.to_string();
        let now = w.now.to_string();
        let raw = w
            .ledger
            .evaluate(contracts::LATENCY, ops::ANALYSE_LATENCY_TO_TARGET, &[w.target.clone(), window.clone(), now.clone()])
            .map_err(|e| e.to_string())?;
        let lat: LatencyAnalysis = serde_json::from_slice(&raw).unwrap();
        for d in &w.servers {
            match (lat.for_server(&d.id), w.latency_oracle(&d.id)) {
                (Some(s), Some((m, n))) => {
                    ensure!(s.sample_count == n && rel_close(s.avg_latency_ms, m), "case {case} {}: latency {} vs {m}", d.id, s.avg_latency_ms);
                }
                (None, None) => {}
                (g, o) => return Err(format!("case {case} {}: contract {g:?} oracle {o:?}", d.id)),
            }
            let raw = w
                .ledger
                .evaluate(contracts::RESOURCE, ops::ANALYSE_RESOURCES, &[d.id.clone(), window.clone(), now.clone()])
                .map_err(|e| e.to_string())?;
            let res: ResourceAnalysis = serde_json::from_slice(&raw).unwrap();
            match w.resource_oracle(&d.id) {
                Some((cpu, mem, c, n)) => {
                    let ok = res.sample_count == n
                        && res.avg_cpu.is_some_and(|v| rel_close(v, cpu))
                        && res.avg_memory.is_some_and(|v| rel_close(v, mem))
                        && res.avg_containers.is_some_and(|v| rel_close(v, c));
                    ensure!(ok, "case {case} {}: resources {res:?} vs ({cpu}, {mem}, {c}, {n})", d.id);
                }
                None => ensure!(res.sample_count == 0 && res.avg_cpu.is_none(), "case {case} {}: {res:?}", d.id),
            }
            checked += 1;
        }
    }
    Ok(format!("1000 record sets, {checked} server analyses within 1e-9"))
}

fn integrity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0006);
    let mut flips = 0;
    for case in 0..100 {
        let l = random_chain(rng.random(), 20);
        let blocks = l.blocks();
        ensure!(blocks.len() > 20, "case {case}: only {} blocks", blocks.len());
        ensure!(ledger::verify_chain(&blocks).valid, "case {case}: untampered chain rejected");
        ensure!(WorldState::replay(&blocks).digest() == l.state_digest(), "case {case}: replay diverged");
        let world = l.world();
        let reexecuted = reexecute(&blocks, &contracts::default_registry()).map_err(|e| e.to_string())?;
        ensure!(reexecuted.entries() == world.entries(), "case {case}: re-execution diverged");

        let records: Vec<Vec<u8>> = blocks.iter().map(|b| b.encode()).collect();
        ensure!(verify_records(&records).valid, "case {case}: encoded chain rejected");
        for _ in 0..10 {
            let height = rng.random_range(1..records.len());
            // transaction bytes sit between the 44-byte header and the trailing hash
            let at = rng.random_range(44..records[height].len() - 32);
            let mut tampered = records.clone();
            tampered[height][at] ^= 1 << rng.random_range(0..8);
            let report = verify_records(&tampered);
            ensure!(
                !report.valid && report.first_bad_height == Some(height as u64),
                "case {case}: flip at block {height} byte {at} reported {:?}",
                report.first_bad_height
            );
            flips += 1;
        }
    }
    Ok(format!("100 chains of >=20 blocks, {flips} flips caught at the right height"))
}

struct Always(LinkEffect);

impl LinkModel for Always {
    fn on_reply(&self, _: std::net::SocketAddr) -> LinkEffect {
        self.0
    }
}

async fn echo_peer(link: Arc<dyn LinkModel>) -> (String, tokio::sync::oneshot::Sender<()>) {
    let server = EchoServer::bind("127.0.0.1:0", "cred").await.unwrap().with_link(link);
    let addr = server.local_addr().unwrap().to_string();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(server.serve(async {
        let _ = rx.await;
    }));
    (addr, tx)
}

fn target(address: String) -> ProbeTarget {
    ProbeTarget {
        target_id: "peer".into(),
        address,
        credential_ref: "cred".into(),
    }
}

fn probes() -> Outcome {
    runtime().block_on(async {
        let prober = Prober::new(Duration::from_secs(5));
        let mut parts = Vec::new();
        for d in [0u64, 50, 200] {
            let (addr, _stop) = echo_peer(Arc::new(FixedDelay(Duration::from_millis(d)))).await;
            let ms = prober.probe(&target(addr)).await;
            let lo = 2.0 * d as f64 * 0.9;
            ensure!(ms >= 0 && ms as f64 >= lo && ms <= 2 * d as i64 + 250, "d={d}: measured {ms} ms");
            parts.push(format!("d={d}:{ms}ms"));
        }
        let closed = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().to_string()
        };
        let unreachable = prober.probe(&target(closed)).await;
        ensure!(unreachable == -1, "unreachable peer gave {unreachable}");
        let (addr, _stop) = echo_peer(Arc::new(Always(LinkEffect::Garble(Duration::ZERO)))).await;
        let garbled = prober.probe(&target(addr)).await;
        ensure!(garbled == -1, "wrong-payload peer gave {garbled}");
        Ok(format!("{}, unreachable=-1, wrong payload=-1", parts.join(" ")))
    })
}

fn staleness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0008);
    let mut stale_seen = 0;
    for case in 0..1000 {
        let w = random_world(&mut rng, false);
        let stale: Vec<&str> = w
            .servers
            .iter()
            .filter(|d| w.latency_oracle(&d.id).is_none())
            .map(|d| d.id.as_str())
            .collect();
        stale_seen += stale.len();
        if let Ok(ranking) = w.select(false) {
            if let Some(e) = ranking.iter().find(|e| stale.contains(&e.server_id.as_str())) {
                return Err(format!("case {case}: stale server {} selected", e.server_id));
            }
        }
    }
    ensure!(stale_seen > 0, "no stale servers were generated");
    Ok(format!("1000 ledgers, {stale_seen} stale servers, none ranked"))
}

fn write_read_split() -> Outcome {
    let ledger = Arc::new(
        Ledger::in_memory(
            LedgerConfig {
                max_txs: 10,
                block_timeout: Duration::from_millis(500),
                log_path: None,
            },
            contracts::default_registry(),
        )
        .map_err(|e| e.to_string())?,
    );
    runtime().block_on(async {
        let gw = gateway::spawn("127.0.0.1:0".parse().unwrap(), ledger, vec![]).await.map_err(|e| e.to_string())?;
        let client = GatewayClient::new(&gw.url());
        let mut slowest_read = Duration::ZERO;
        let mut fastest_write = Duration::MAX;
        for i in 0..5 {
            let t = Instant::now();
            client
                .create_device(&device(&format!("d{i}"), Role::EdgeServer))
                .await
                .map_err(|e| e.to_string())?;
            fastest_write = fastest_write.min(t.elapsed());
            for _ in 0..4 {
                let t = Instant::now();
                client.get_device(&format!("d{i}")).await.map_err(|e| e.to_string())?;
                slowest_read = slowest_read.max(t.elapsed());
            }
        }
        let stats = client.stats().await.map_err(|e| e.to_string())?;
        gw.shutdown().await;
        ensure!(fastest_write >= Duration::from_millis(250), "fastest write {fastest_write:?}");
        ensure!(slowest_read < Duration::from_millis(50), "slowest read {slowest_read:?}");
        let (w, r) = (stats.write_mean_ms.unwrap_or(0.0), stats.read_mean_ms.unwrap_or(f64::MAX));
        ensure!(stats.write_count == 5 && stats.read_count == 20, "counts {stats:?}");
        ensure!(w >= 250.0 && r < 50.0, "stats means write {w:.2} read {r:.2}");
        Ok(format!("writes >= {:.0} ms, reads <= {:.2} ms, /stats write {w:.1} read {r:.2}", fastest_write.as_secs_f64() * 1e3, slowest_read.as_secs_f64() * 1e3))
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("scenario replay exp1", exp1),
        ("scenario replay exp3", exp3),
        ("scenario replay exp5", exp5),
        ("selection-order oracle", selection_order),
        ("analysis oracle", analysis),
        ("ledger integrity", integrity),
        ("probe semantics", probes),
        ("staleness filter", staleness),
        ("write/read latency split", write_read_split),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
