//! Blocking client for the gateway's JSON endpoint.

use std::time::Duration;

use ei_core::protocol::{
    AppsArgs, AppsPayload, DownloadArgs, Envelope, ErrorBody, ErrorCode, ExecuteArgs, ExecutePayload, FetchOutputArgs,
    FetchOutputPayload, Request,
};
use ei_core::ExecId;
use serde::de::DeserializeOwned;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach {endpoint}: {source}")]
    Transport {
        endpoint: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("{}: {}", code_name(.0.code), .0.message)]
    Gateway(ErrorBody),
    #[error("unexpected response ({status}): {message}")]
    Protocol { status: u16, message: String },
}

fn code_name(code: ErrorCode) -> String {
    serde_json::to_value(code).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Gateway(body) => Some(body.code),
            _ => None,
        }
    }
}

/// One client keeps one cookie jar, so its calls share a session.
pub struct Client {
    endpoint: String,
    http: reqwest::blocking::Client,
}

impl Client {
    /// `endpoint` is the full command URL, such as `http://host:8080/ei/server`.
    pub fn new(endpoint: impl Into<String>) -> Result<Self, ClientError> {
        let endpoint = endpoint.into().trim_end_matches('/').to_owned();
        let http = reqwest::blocking::Client::builder()
            .cookie_store(true)
            .connect_timeout(Duration::from_secs(10))
            .timeout(None)
            .build()
            .map_err(|source| ClientError::Transport { endpoint: endpoint.clone(), source })?;
        Ok(Client { endpoint, http })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn transport(&self, source: reqwest::Error) -> ClientError {
        ClientError::Transport { endpoint: self.endpoint.clone(), source }
    }

    pub fn call<T: DeserializeOwned>(&self, request: &Request) -> Result<T, ClientError> {
        let response = self.http.post(&self.endpoint).json(request).send().map_err(|e| self.transport(e))?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| self.transport(e))?;
        match serde_json::from_str::<Envelope<T>>(&text) {
            Ok(Envelope::Ok { payload }) => Ok(payload),
            Ok(Envelope::Error { error }) => Err(ClientError::Gateway(error)),
            Err(e) => Err(ClientError::Protocol { status, message: e.to_string() }),
        }
    }

    pub fn execute(&self, args: ExecuteArgs) -> Result<ExecutePayload, ClientError> {
        self.call(&Request::Execute(args))
    }

    pub fn apps(&self) -> Result<AppsPayload, ClientError> {
        self.call(&Request::Apps(AppsArgs::default()))
    }

    pub fn fetch_output(&self, execid: &ExecId, cursor: u64) -> Result<FetchOutputPayload, ClientError> {
        self.call(&Request::FetchOutput(FetchOutputArgs { execid: execid.clone(), cursor }))
    }

    /// Fetch a file from the execution's download directory.
    pub fn download(&self, execid: &ExecId, filename: &str) -> Result<Vec<u8>, ClientError> {
        let request = Request::Download(DownloadArgs { execid: execid.clone(), filename: filename.to_owned() });
        let response = self.http.post(&self.endpoint).json(&request).send().map_err(|e| self.transport(e))?;
        let status = response.status().as_u16();
        if response.status().is_success() {
            return Ok(response.bytes().map_err(|e| self.transport(e))?.to_vec());
        }
        let text = response.text().map_err(|e| self.transport(e))?;
        match serde_json::from_str::<Envelope<serde_json::Value>>(&text) {
            Ok(Envelope::Error { error }) => Err(ClientError::Gateway(error)),
            _ => Err(ClientError::Protocol { status, message: text }),
        }
    }
}
