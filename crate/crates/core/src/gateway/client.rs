//! HTTP client for the gateway API, used by the daemon and the simulator.

use std::time::Duration;

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::error::ApiError;
use super::stats::OpTimingStats;
use super::SelectRequest;
use crate::contracts::{DeviceRecord, LatencyRecord, ResourceSample, SelectionEntry};
use crate::daemon::ProbeTarget;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("gateway unreachable: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("gateway returned {}: {} ({})", .0.http_status, .0.code, .0.message)]
    Api(ApiError),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api(e) => Some(e.http_status),
            ClientError::Transport(e) => e.status().map(|s| s.as_u16()),
        }
    }
}

#[derive(Debug, Deserialize)]
struct IdBody {
    id: String,
}

#[derive(Debug, Deserialize)]
struct KeyBody {
    key: String,
}

#[derive(Debug, Deserialize)]
struct CountBody {
    count: usize,
}

#[derive(Clone)]
pub struct GatewayClient {
    base: String,
    http: reqwest::Client,
}

impl GatewayClient {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(30))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client builds");
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T, ClientError> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let bytes = resp.bytes().await?;
        let err = serde_json::from_slice::<ApiError>(&bytes).unwrap_or_else(|_| {
            ApiError::new(
                StatusCode::from_u16(status.as_u16()).unwrap_or(StatusCode::BAD_GATEWAY),
                "unexpected_response",
                String::from_utf8_lossy(&bytes).into_owned(),
            )
        });
        Err(ClientError::Api(err))
    }

    pub async fn create_device(&self, d: &DeviceRecord) -> Result<String, ClientError> {
        let b: IdBody = self.call(Method::POST, "/devices", Some(d)).await?;
        Ok(b.id)
    }

    pub async fn get_device(&self, id: &str) -> Result<DeviceRecord, ClientError> {
        self.call::<(), _>(Method::GET, &format!("/devices/{id}"), None).await
    }

    pub async fn update_device(&self, d: &DeviceRecord) -> Result<DeviceRecord, ClientError> {
        self.call(Method::PUT, &format!("/devices/{}", d.id), Some(d)).await
    }

    pub async fn delete_device(&self, id: &str) -> Result<String, ClientError> {
        let b: IdBody = self
            .call::<(), _>(Method::DELETE, &format!("/devices/{id}"), None)
            .await?;
        Ok(b.id)
    }

    /// `role` is `server` or `sensor`; `None` lists everything.
    pub async fn list_devices(&self, role: Option<&str>, gpu: bool) -> Result<Vec<DeviceRecord>, ClientError> {
        let mut path = "/devices".to_string();
        if let Some(r) = role {
            path.push_str(&format!("?role={r}"));
            if gpu {
                path.push_str("&gpu=true");
            }
        }
        self.call::<(), _>(Method::GET, &path, None).await
    }

    pub async fn targets(&self, source: &str) -> Result<Vec<ProbeTarget>, ClientError> {
        self.call::<(), _>(Method::GET, &format!("/targets?source={source}"), None)
            .await
    }

    pub async fn post_resource(&self, s: &ResourceSample) -> Result<String, ClientError> {
        let b: KeyBody = self.call(Method::POST, "/resources", Some(s)).await?;
        Ok(b.key)
    }

    pub async fn post_latency(&self, batch: &[LatencyRecord]) -> Result<usize, ClientError> {
        let b: CountBody = self.call(Method::POST, "/latency", Some(&batch)).await?;
        Ok(b.count)
    }

    pub async fn select(&self, req: &SelectRequest) -> Result<Vec<SelectionEntry>, ClientError> {
        self.call(Method::POST, "/select", Some(req)).await
    }

    pub async fn stats(&self) -> Result<OpTimingStats, ClientError> {
        self.call::<(), _>(Method::GET, "/stats", None).await
    }
}
