//! Async client for the cisguard HTTP service. One method per endpoint.

use cisguard_core::api::{
    DecodeRequest, DiffRequest, DiffResponse, ErrorBody, Health, InjectRequest, ProfileRequest,
    ProfileResponse, RunRequest, RunResponse, StatsRequest, StatsResponse,
};
use cisguard_core::channel::Envelope;
use cisguard_core::sim::Scenario;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error body.
    #[error("{} ({status})", body.error)]
    Api { status: StatusCode, body: ErrorBody },
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            kind: "http".into(),
            error: text,
        });
        Err(ClientError::Api { status, body })
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ClientError> {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await?;
        Self::decode(resp).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        let resp = self.http.get(format!("{}/health", self.base)).send().await?;
        Self::decode(resp).await
    }

    pub async fn profile(&self, req: &ProfileRequest) -> Result<ProfileResponse, ClientError> {
        self.post("/v1/profile", req).await
    }

    pub async fn stats(&self, req: &StatsRequest) -> Result<StatsResponse, ClientError> {
        self.post("/v1/stats", req).await
    }

    pub async fn diff(&self, req: &DiffRequest) -> Result<DiffResponse, ClientError> {
        self.post("/v1/diff", req).await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunResponse, ClientError> {
        self.post("/v1/run", req).await
    }

    pub async fn inject(&self, req: &InjectRequest) -> Result<Scenario, ClientError> {
        self.post("/v1/inject", req).await
    }

    pub async fn decode_envelope(&self, hex: &str) -> Result<Envelope, ClientError> {
        self.post("/v1/envelope/decode", &DecodeRequest { hex: hex.into() })
            .await
    }
}
