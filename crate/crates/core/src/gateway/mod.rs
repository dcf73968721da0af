//! HTTP gateway in front of the ledger.
//!
//! Mutating endpoints go through [`Ledger::submit`] and therefore wait for
//! block commit; queries go through [`Ledger::evaluate`]. Every ledger-backed
//! endpoint is timed as either a read or a write.
//!
//! | method | path              | contract operation                      |
//! |--------|-------------------|-----------------------------------------|
//! | POST   | /devices          | inventory.CreateDevice                  |
//! | GET    | /devices/{id}     | inventory.ReadDevice                    |
//! | PUT    | /devices/{id}     | inventory.UpdateDevice                  |
//! | DELETE | /devices/{id}     | inventory.DeleteDevice                  |
//! | GET    | /devices?role=..  | inventory.GetServerList[GPU] / ...      |
//! | GET    | /targets?source=  | inventory.GetSensorList                 |
//! | POST   | /resources        | resource.PutResourceSample              |
//! | POST   | /latency          | latency.PutLatencyMeasurements          |
//! | POST   | /select           | offload.SelectOffloadServer             |
//! | GET    | /stats            | (timing statistics)                     |

pub mod client;
pub mod error;
pub mod stats;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::clock::Clock;
use crate::contracts::{self, ops, DeviceRecord, SelectionEntry, TaskProperties};
use crate::daemon::ProbeTarget;
use crate::ledger::Ledger;

pub use client::{ClientError, GatewayClient};
pub use error::ApiError;
pub use stats::{OpKind, OpTimingStats, TimingStats};

pub const DEFAULT_WINDOW_MINUTES: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SelectRequest {
    pub target_id: String,
    #[serde(default)]
    pub requires_gpu: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_minutes: Option<u32>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    /// Analysis reference time; the gateway's receive time when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub now_ms: Option<i64>,
}

#[derive(Clone)]
pub struct AppState {
    ledger: Arc<Ledger>,
    clock: Arc<dyn Clock>,
    stats: Arc<TimingStats>,
    notify_urls: Arc<Vec<String>>,
    http: reqwest::Client,
}

impl AppState {
    pub fn new(ledger: Arc<Ledger>, notify_urls: Vec<String>) -> Self {
        let clock = ledger.clock();
        Self {
            ledger,
            clock,
            stats: Arc::new(TimingStats::new()),
            notify_urls: Arc::new(notify_urls),
            http: reqwest::Client::builder()
                .timeout(std::time::Duration::from_secs(5))
                .build()
                .expect("http client builds"),
        }
    }

    pub fn stats(&self) -> &TimingStats {
        &self.stats
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/devices", post(create_device).get(list_devices))
        .route(
            "/devices/{id}",
            get(read_device).put(update_device).delete(delete_device),
        )
        .route("/targets", get(targets))
        .route("/resources", post(post_resource))
        .route("/latency", post(post_latency))
        .route("/select", post(select))
        .route("/stats", get(stats))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A gateway running on a background task.
pub struct GatewayHandle {
    pub addr: SocketAddr,
    pub state: AppState,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl GatewayHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }
}

pub async fn spawn(
    listen: SocketAddr,
    ledger: Arc<Ledger>,
    notify_urls: Vec<String>,
) -> std::io::Result<GatewayHandle> {
    let listener = TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let state = AppState::new(ledger, notify_urls);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(serve(listener, state.clone(), async {
        let _ = rx.await;
    }));
    Ok(GatewayHandle {
        addr,
        state,
        stop: Some(tx),
        task,
    })
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn decode<T: DeserializeOwned>(raw: Vec<u8>) -> ApiResult<T> {
    serde_json::from_slice(&raw).map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            format!("contract returned malformed output: {e}"),
        )
    })
}

impl AppState {
    async fn submit(&self, contract: &'static str, op: &'static str, args: Vec<String>) -> ApiResult<Vec<u8>> {
        let ledger = self.ledger.clone();
        tokio::task::spawn_blocking(move || ledger.submit(contract, op, &args))
            .await
            .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ledger_unavailable", e.to_string()))?
            .map(|r| r.result)
            .map_err(ApiError::from)
    }

    async fn evaluate(&self, contract: &'static str, op: &'static str, args: Vec<String>) -> ApiResult<Vec<u8>> {
        let ledger = self.ledger.clone();
        tokio::task::spawn_blocking(move || ledger.evaluate(contract, op, &args))
            .await
            .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ledger_unavailable", e.to_string()))?
            .map_err(ApiError::from)
    }

    async fn timed<T>(&self, kind: OpKind, fut: impl Future<Output = T>) -> T {
        let start = Instant::now();
        let out = fut.await;
        self.stats.record(kind, start.elapsed().as_secs_f64() * 1000.0);
        out
    }
}

async fn create_device(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    s.timed(OpKind::Write, async {
        let d: DeviceRecord = parse_body(&body)?;
        let raw = s
            .submit(contracts::INVENTORY, ops::CREATE_DEVICE, vec![serde_json::to_string(&d).unwrap()])
            .await?;
        let id: String = decode(raw)?;
        Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
    })
    .await
}

async fn read_device(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DeviceRecord>> {
    s.timed(OpKind::Read, async {
        let raw = s.evaluate(contracts::INVENTORY, ops::READ_DEVICE, vec![id]).await?;
        Ok(Json(decode(raw)?))
    })
    .await
}

async fn update_device(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<DeviceRecord>> {
    s.timed(OpKind::Write, async {
        let d: DeviceRecord = parse_body(&body)?;
        if d.id != id {
            return Err(ApiError::bad_request(format!(
                "body id {:?} does not match path id {id:?}",
                d.id
            )));
        }
        let raw = s
            .submit(contracts::INVENTORY, ops::UPDATE_DEVICE, vec![serde_json::to_string(&d).unwrap()])
            .await?;
        Ok(Json(decode(raw)?))
    })
    .await
}

async fn delete_device(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    s.timed(OpKind::Write, async {
        let raw = s.submit(contracts::INVENTORY, ops::DELETE_DEVICE, vec![id]).await?;
        let id: String = decode(raw)?;
        Ok(Json(json!({ "id": id })))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceQuery {
    role: Option<String>,
    #[serde(default)]
    gpu: bool,
}

async fn list_devices(
    State(s): State<AppState>,
    Query(q): Query<DeviceQuery>,
) -> ApiResult<Json<Vec<DeviceRecord>>> {
    s.timed(OpKind::Read, async {
        let op = match (q.role.as_deref(), q.gpu) {
            (Some("server" | "edge-server"), false) => ops::GET_SERVER_LIST,
            (Some("server" | "edge-server"), true) => ops::GET_SERVER_LIST_GPU,
            (Some("sensor"), false) => ops::GET_SENSOR_LIST,
            (None, false) => ops::LIST_DEVICES,
            (role, gpu) => {
                return Err(ApiError::bad_request(format!(
                    "unsupported filter role={role:?} gpu={gpu}"
                )))
            }
        };
        let raw = s.evaluate(contracts::INVENTORY, op, vec![]).await?;
        Ok(Json(decode(raw)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetQuery {
    source: String,
}

async fn targets(State(s): State<AppState>, Query(q): Query<TargetQuery>) -> ApiResult<Json<Vec<ProbeTarget>>> {
    s.timed(OpKind::Read, async {
        let source: DeviceRecord =
            decode(s.evaluate(contracts::INVENTORY, ops::READ_DEVICE, vec![q.source]).await?)?;
        // only edge servers probe
        if !source.is_server() || !source.active {
            return Ok(Json(Vec::new()));
        }
        let sensors: Vec<DeviceRecord> =
            decode(s.evaluate(contracts::INVENTORY, ops::GET_SENSOR_LIST, vec![]).await?)?;
        Ok(Json(
            sensors
                .into_iter()
                .map(|d| ProbeTarget {
                    target_id: d.id,
                    address: d.address,
                    credential_ref: d.credential_ref,
                })
                .collect(),
        ))
    })
    .await
}

async fn post_resource(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    s.timed(OpKind::Write, async {
        let sample: contracts::ResourceSample = parse_body(&body)?;
        let raw = s
            .submit(
                contracts::RESOURCE,
                ops::PUT_RESOURCE_SAMPLE,
                vec![serde_json::to_string(&sample).unwrap()],
            )
            .await?;
        let key: String = decode(raw)?;
        Ok((StatusCode::CREATED, Json(json!({ "key": key }))))
    })
    .await
}

async fn post_latency(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    s.timed(OpKind::Write, async {
        let batch: Vec<contracts::LatencyRecord> = parse_body(&body)?;
        let raw = s
            .submit(
                contracts::LATENCY,
                ops::PUT_LATENCY_MEASUREMENTS,
                vec![serde_json::to_string(&batch).unwrap()],
            )
            .await?;
        let count: usize = decode(raw)?;
        Ok((StatusCode::CREATED, Json(json!({ "count": count }))))
    })
    .await
}

async fn select(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Vec<SelectionEntry>>> {
    let now_received = s.clock.now_ms();
    let ranking = s
        .timed(OpKind::Read, async {
            let req: SelectRequest = parse_body(&body)?;
            let task = TaskProperties {
                requires_gpu: req.requires_gpu,
                label: req.label,
            };
            let window = req.window_minutes.unwrap_or(DEFAULT_WINDOW_MINUTES);
            let now = req.now_ms.unwrap_or(now_received);
            let raw = s
                .evaluate(
                    contracts::OFFLOAD,
                    ops::SELECT_OFFLOAD_SERVER,
                    vec![
                        req.target_id,
                        serde_json::to_string(&task).unwrap(),
                        window.to_string(),
                        now.to_string(),
                    ],
                )
                .await?;
            decode::<Vec<SelectionEntry>>(raw)
        })
        .await?;
    if let Some(head) = ranking.first() {
        notify(&s, head);
    }
    Ok(Json(ranking))
}

/// One fire-and-forget POST of the selected server per registered URL.
fn notify(s: &AppState, head: &SelectionEntry) {
    for url in s.notify_urls.iter() {
        let http = s.http.clone();
        let url = url.clone();
        let body = head.clone();
        tokio::spawn(async move {
            match http.post(&url).json(&body).send().await {
                Ok(r) if r.status().is_success() => {}
                Ok(r) => tracing::warn!(%url, status = %r.status(), "selection notification rejected"),
                Err(e) => tracing::warn!(%url, "selection notification failed: {e}"),
            }
        });
    }
}

async fn stats(State(s): State<AppState>) -> Json<OpTimingStats> {
    Json(s.stats.snapshot())
}
