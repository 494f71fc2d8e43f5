//! Thin async client for the tunnelfit HTTP API.
//!
//! Response bodies pass through unaltered: CSV endpoints return the exact
//! bytes the server produced (the determinism guarantees live server-side),
//! JSON endpoints deserialize into the shared [`tunnelfit_core::api`] types.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use tunnelfit_core::api::{
    ConvergenceRequest, CreateTunnelRequest, EngagementRequest, EngagementResponse, ErrorBody,
    EvalRequest, FitRequest, FresnelRequest, FresnelResponse, InvertRequest, InvertResponse,
    LocateReport, LocateRequest, NormalizeRequest, NormalizeResponse, PathLossRequest,
    PathLossResponse, SimulateRequest, TunnelFitRequest, TunnelLocateRequest, TunnelSummary,
};
use tunnelfit_core::formats::ModelFile;

/// Client-side failures: transport problems or an error envelope from the
/// service.
#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("{code}: {message}")]
    Api { status: u16, code: String, message: String },
}

impl ClientError {
    /// The service's machine-readable error code, when one was returned.
    pub fn api_code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            ClientError::Transport(_) => None,
        }
    }
}

pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base_url` like `http://127.0.0.1:8080`, with or without a trailing
    /// slash.
    pub fn new(base_url: impl Into<String>) -> Self {
        let mut base = base_url.into();
        while base.ends_with('/') {
            base.pop();
        }
        Client { base, http: reqwest::Client::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn check(response: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        if response.status().is_success() {
            return Ok(response);
        }
        let status = response.status().as_u16();
        let text = response.text().await.unwrap_or_default();
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api {
                status,
                code: body.error.code,
                message: body.error.message,
            }),
            Err(_) => Err(ClientError::Api {
                status,
                code: "internal".to_string(),
                message: if text.is_empty() { format!("HTTP {status}") } else { text },
            }),
        }
    }

    async fn post_json<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        req: &Req,
    ) -> Result<Resp, ClientError> {
        let response = self.http.post(self.url(path)).json(req).send().await?;
        Ok(Self::check(response).await?.json().await?)
    }

    async fn post_text<Req: Serialize>(&self, path: &str, req: &Req) -> Result<String, ClientError> {
        let response = self.http.post(self.url(path)).json(req).send().await?;
        Ok(Self::check(response).await?.text().await?)
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let response = self.http.get(self.url("/health")).send().await?;
        Self::check(response).await?;
        Ok(())
    }

    /// Synthetic campaign CSV, byte-exact as served.
    pub async fn simulate(&self, req: &SimulateRequest) -> Result<String, ClientError> {
        self.post_text("/v1/simulate", req).await
    }

    pub async fn fit(&self, req: &FitRequest) -> Result<ModelFile, ClientError> {
        self.post_json("/v1/fit", req).await
    }

    /// Experiment-matrix trace CSV, byte-exact as served.
    pub async fn convergence(&self, req: &ConvergenceRequest) -> Result<String, ClientError> {
        self.post_text("/v1/convergence", req).await
    }

    pub async fn locate(&self, req: &LocateRequest) -> Result<LocateReport, ClientError> {
        self.post_json("/v1/locate", req).await
    }

    /// Curve CSV, byte-exact as served.
    pub async fn eval(&self, req: &EvalRequest) -> Result<String, ClientError> {
        self.post_text("/v1/eval", req).await
    }

    pub async fn path_loss(&self, req: &PathLossRequest) -> Result<PathLossResponse, ClientError> {
        self.post_json("/v1/model/path-loss", req).await
    }

    pub async fn invert(&self, req: &InvertRequest) -> Result<InvertResponse, ClientError> {
        self.post_json("/v1/model/invert", req).await
    }

    pub async fn fresnel(&self, req: &FresnelRequest) -> Result<FresnelResponse, ClientError> {
        self.post_json("/v1/model/fresnel", req).await
    }

    pub async fn normalize(&self, req: &NormalizeRequest) -> Result<NormalizeResponse, ClientError> {
        self.post_json("/v1/model/normalize", req).await
    }

    pub async fn create_tunnel(
        &self,
        req: &CreateTunnelRequest,
    ) -> Result<TunnelSummary, ClientError> {
        self.post_json("/v1/tunnels", req).await
    }

    pub async fn list_tunnels(&self) -> Result<Vec<TunnelSummary>, ClientError> {
        let response = self.http.get(self.url("/v1/tunnels")).send().await?;
        Ok(Self::check(response).await?.json().await?)
    }

    pub async fn tunnel(&self, id: &str) -> Result<TunnelSummary, ClientError> {
        let response = self.http.get(self.url(&format!("/v1/tunnels/{id}"))).send().await?;
        Ok(Self::check(response).await?.json().await?)
    }

    pub async fn delete_tunnel(&self, id: &str) -> Result<(), ClientError> {
        let response = self.http.delete(self.url(&format!("/v1/tunnels/{id}"))).send().await?;
        Self::check(response).await?;
        Ok(())
    }

    pub async fn engage(
        &self,
        id: &str,
        req: &EngagementRequest,
    ) -> Result<EngagementResponse, ClientError> {
        self.post_json(&format!("/v1/tunnels/{id}/engagements"), req).await
    }

    pub async fn fit_tunnel(
        &self,
        id: &str,
        req: &TunnelFitRequest,
    ) -> Result<ModelFile, ClientError> {
        self.post_json(&format!("/v1/tunnels/{id}/fit"), req).await
    }

    pub async fn tunnel_model(&self, id: &str) -> Result<ModelFile, ClientError> {
        let response =
            self.http.get(self.url(&format!("/v1/tunnels/{id}/model"))).send().await?;
        Ok(Self::check(response).await?.json().await?)
    }

    pub async fn locate_in_tunnel(
        &self,
        id: &str,
        req: &TunnelLocateRequest,
    ) -> Result<LocateReport, ClientError> {
        self.post_json(&format!("/v1/tunnels/{id}/locate"), req).await
    }
}
