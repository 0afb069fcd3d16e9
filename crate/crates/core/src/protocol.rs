//! JSON shapes exchanged with the gateway at `POST /ei/server`.
//!
//! Requests carry a `command` field naming the operation. Every response is
//! an envelope, `{"status":"ok","payload":{..}}` or
//! `{"status":"error","error":{"code":..,"message":..}}`, except downloads,
//! which answer with the raw file.

use std::collections::BTreeMap;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::config::{AppSummary, ExampleSet};
use crate::ExecId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Request {
    Execute(ExecuteArgs),
    Apps(AppsArgs),
    Examples(ExamplesArgs),
    #[serde(rename = "fetchoutput")]
    FetchOutput(FetchOutputArgs),
    Download(DownloadArgs),
}

impl Request {
    pub const COMMANDS: [&'static str; 5] = ["execute", "apps", "examples", "fetchoutput", "download"];
}

/// A parameter value: one string or a list of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    One(String),
    Many(Vec<String>),
}

impl ParamValue {
    pub fn into_vec(self) -> Vec<String> {
        match self {
            ParamValue::One(v) => vec![v],
            ParamValue::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Utf8,
    Base64,
}

impl Encoding {
    pub fn is_utf8(&self) -> bool {
        *self == Encoding::Utf8
    }
}

/// Bytes as JSON text: UTF-8 as is, anything else in base64.
pub fn encode_bytes(bytes: &[u8]) -> (Encoding, String) {
    match std::str::from_utf8(bytes) {
        Ok(s) => (Encoding::Utf8, s.to_owned()),
        Err(_) => (Encoding::Base64, base64::engine::general_purpose::STANDARD.encode(bytes)),
    }
}

pub fn decode_bytes(encoding: Encoding, data: &str) -> Result<Vec<u8>, base64::DecodeError> {
    match encoding {
        Encoding::Utf8 => Ok(data.as_bytes().to_vec()),
        Encoding::Base64 => base64::engine::general_purpose::STANDARD.decode(data),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileArg {
    pub path: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Encoding::is_utf8")]
    pub encoding: Encoding,
}

impl FileArg {
    pub fn new(path: impl Into<String>, bytes: &[u8]) -> Self {
        let (encoding, content) = encode_bytes(bytes);
        FileArg { path: path.into(), content, encoding }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecuteArgs {
    pub app_id: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<FileArg>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outline: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AppsArgs {
    /// Ask for one app by id, hidden or not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExamplesArgs {
    /// Restrict to these set ids; all sets when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchOutputArgs {
    pub execid: ExecId,
    #[serde(default)]
    pub cursor: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadArgs {
    pub execid: ExecId,
    pub filename: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Eiout,
    PlainText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintInfo {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutePayload {
    pub execid: ExecId,
    pub kind: OutputKind,
    pub output: String,
    #[serde(default, skip_serializing_if = "Encoding::is_utf8")]
    pub encoding: Encoding,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub truncated: bool,
    pub duration_s: f64,
    /// Problems found in eiout output, for tool authors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lints: Vec<LintInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppsPayload {
    pub apps: Vec<AppSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppPayload {
    pub app: AppSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplesPayload {
    pub example_sets: Vec<ExampleSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireChunk {
    pub index: u64,
    #[serde(default, skip_serializing_if = "Encoding::is_utf8")]
    pub encoding: Encoding,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchOutputPayload {
    pub execid: ExecId,
    pub chunks: Vec<WireChunk>,
    pub next_cursor: u64,
    pub live: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    BadRequest,
    UnknownCommand,
    NoSuchApp,
    InvalidParameters,
    NotFound,
    Gone,
    ToolUnavailable,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::BadRequest | ErrorCode::UnknownCommand => 400,
            ErrorCode::NoSuchApp | ErrorCode::NotFound => 404,
            ErrorCode::Gone => 410,
            ErrorCode::InvalidParameters => 422,
            ErrorCode::ToolUnavailable => 503,
            ErrorCode::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireViolation {
    pub param: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<WireViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Envelope<T> {
    Ok { payload: T },
    Error { error: ErrorBody },
}
