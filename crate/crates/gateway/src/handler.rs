use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::SystemTime;

use ei_core::command::{ExecutionRequest, InputFile, Violation};
use ei_core::config::{load_registry, ConfigDefaults, Registry, RegistryError, Severity};
use ei_core::eiout::{self, LintContext};
use ei_core::engine::{Engine, EngineError};
use ei_core::protocol::*;
use ei_core::ExecId;
use serde::Serialize;
use serde_json::Value;

use crate::classify::classify_output;
use crate::config::ServerConfig;
use crate::session::SessionKeys;

const DEFAULT_CLIENT_ID: &str = "unknown";
const MAX_CLIENT_ID_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Json(Value),
    File { bytes: Vec<u8>, media_type: String, filename: String },
}

/// A transport-independent response.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Body,
    pub set_cookie: Option<String>,
}

impl Reply {
    fn ok(payload: impl Serialize) -> Self {
        let payload = serde_json::to_value(payload).expect("payloads serialize");
        Reply { status: 200, body: Body::Json(serde_json::json!({ "status": "ok", "payload": payload })), set_cookie: None }
    }

    fn error(failure: Failure) -> Self {
        let error = ErrorBody { code: failure.code, message: failure.message, violations: failure.violations };
        let body = serde_json::to_value(Envelope::<()>::Error { error }).expect("errors serialize");
        Reply { status: failure.code.http_status(), body: Body::Json(body), set_cookie: None }
    }

    /// The JSON body, if this is not a file.
    pub fn json(&self) -> Option<&Value> {
        match &self.body {
            Body::Json(v) => Some(v),
            Body::File { .. } => None,
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: ErrorCode,
    message: String,
    violations: Vec<WireViolation>,
}

impl Failure {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Failure { code, message: message.into(), violations: Vec::new() }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::InvalidParameters(violations) => {
                return Failure {
                    code: ErrorCode::InvalidParameters,
                    message: "invalid parameters".into(),
                    violations: violations.iter().map(wire_violation).collect(),
                }
            }
            EngineError::BadFile(_) | EngineError::BadFilename(_) => ErrorCode::BadRequest,
            EngineError::ToolUnavailable { .. } | EngineError::SpawnDenied { .. } => ErrorCode::ToolUnavailable,
            EngineError::NotFound(_) | EngineError::NoSuchFile { .. } => ErrorCode::NotFound,
            EngineError::Gone(_) => ErrorCode::Gone,
            EngineError::AlreadyStarted(_) | EngineError::Io(_) => ErrorCode::Internal,
        };
        if code == ErrorCode::Internal {
            tracing::error!(error = %e, "engine failure");
            return Failure::new(code, "internal error");
        }
        Failure::new(code, e.to_string())
    }
}

fn wire_violation(v: &Violation) -> WireViolation {
    WireViolation { param: v.param.clone(), message: v.to_string() }
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("state root {path}: {source}")]
    StateRoot {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The command dispatcher behind `POST /ei/server`.
pub struct Gateway {
    registry: RwLock<Arc<Registry>>,
    engine: Engine,
    sessions: SessionKeys,
    config_dir: Option<PathBuf>,
    defaults: ConfigDefaults,
}

impl Gateway {
    pub fn new(registry: Registry, engine: Engine, sessions: SessionKeys) -> Self {
        Gateway {
            registry: RwLock::new(Arc::new(registry)),
            engine,
            sessions,
            config_dir: None,
            defaults: ConfigDefaults::default(),
        }
    }

    /// Load the registry and open the state root named by `config`.
    pub fn from_config(config: &ServerConfig) -> Result<Self, StartError> {
        let defaults = config.config_defaults();
        let registry = load_registry(&config.config_dir, &defaults)?;
        log_diagnostics(&registry);
        let engine = Engine::new(&config.state_root)
            .map_err(|source| StartError::StateRoot { path: config.state_root.clone(), source })?;
        let sessions = match &config.session_secret {
            Some(secret) => SessionKeys::new(secret.as_bytes(), config.session_ttl),
            None => SessionKeys::random(config.session_ttl),
        };
        let mut gateway = Gateway::new(registry, engine, sessions);
        gateway.config_dir = Some(config.config_dir.clone());
        gateway.defaults = defaults;
        Ok(gateway)
    }

    pub fn registry(&self) -> Arc<Registry> {
        Arc::clone(&self.registry.read().unwrap())
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn sessions(&self) -> &SessionKeys {
        &self.sessions
    }

    /// Re-read the config directory and swap the registry in one step.
    /// Requests already running keep the registry they started with.
    pub fn reload(&self) -> Result<(), RegistryError> {
        let Some(dir) = &self.config_dir else { return Ok(()) };
        let registry = load_registry(dir, &self.defaults)?;
        log_diagnostics(&registry);
        *self.registry.write().unwrap() = Arc::new(registry);
        Ok(())
    }

    /// Handle one JSON command. `cookie` is the raw `Cookie` header.
    pub fn handle(&self, body: &[u8], cookie: Option<&str>) -> Reply {
        let session = self.sessions.issue(cookie, SystemTime::now());
        let mut reply = match self.dispatch(body, &session.token) {
            Ok(reply) => reply,
            Err(failure) => Reply::error(failure),
        };
        if session.minted {
            reply.set_cookie = Some(self.sessions.set_cookie(&session.token));
        }
        reply
    }

    /// `GET /ei/server/download/{execid}/{filename}`.
    pub fn download(&self, execid: &str, filename: &str) -> Reply {
        let result = execid
            .parse::<ExecId>()
            .map_err(|e| Failure::new(ErrorCode::BadRequest, e.to_string()))
            .and_then(|execid| self.download_file(&execid, filename));
        result.unwrap_or_else(Reply::error)
    }

    fn dispatch(&self, body: &[u8], session: &str) -> Result<Reply, Failure> {
        let value: Value = serde_json::from_slice(body)
            .map_err(|e| Failure::new(ErrorCode::BadRequest, format!("request is not JSON: {e}")))?;
        let command = value
            .get("command")
            .and_then(Value::as_str)
            .ok_or_else(|| Failure::new(ErrorCode::BadRequest, "request needs a \"command\" string"))?;
        if !Request::COMMANDS.contains(&command) {
            return Err(Failure::new(
                ErrorCode::UnknownCommand,
                format!("unknown command {command:?}; expected one of {}", Request::COMMANDS.join(", ")),
            ));
        }
        let request: Request = serde_json::from_value(value.clone())
            .map_err(|e| Failure::new(ErrorCode::BadRequest, format!("{command}: {e}")))?;
        match request {
            Request::Execute(args) => self.execute(args, session),
            Request::Apps(args) => self.apps(args),
            Request::Examples(args) => self.examples(args),
            Request::FetchOutput(args) => self.fetch_output(args),
            Request::Download(args) => self.download_file(&args.execid, &args.filename),
        }
    }

    fn execute(&self, args: ExecuteArgs, session: &str) -> Result<Reply, Failure> {
        let registry = self.registry();
        let app = registry
            .app(&args.app_id)
            .ok_or_else(|| Failure::new(ErrorCode::NoSuchApp, format!("no such app: {}", args.app_id)))?;
        let client_id = args.client_id.unwrap_or_else(|| DEFAULT_CLIENT_ID.to_owned());
        if client_id.is_empty() || client_id.len() > MAX_CLIENT_ID_LEN || client_id.contains('\0') {
            return Err(Failure::new(ErrorCode::BadRequest, "client_id must be 1-128 bytes without NUL"));
        }
        if args.outline.iter().any(|e| e.contains('\0')) {
            return Err(Failure::new(ErrorCode::BadRequest, "outline entities must not contain NUL"));
        }
        let virtual_paths: Vec<String> = args.files.iter().map(|f| f.path.clone()).collect();
        let files = args
            .files
            .into_iter()
            .map(|f| {
                decode_bytes(f.encoding, &f.content)
                    .map(|content| InputFile { path: f.path.clone(), content })
                    .map_err(|e| Failure::new(ErrorCode::BadRequest, format!("file {}: {e}", f.path)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let parameters: BTreeMap<String, Vec<String>> =
            args.parameters.into_iter().map(|(k, v)| (k, v.into_vec())).collect();
        let request = ExecutionRequest {
            app_id: args.app_id,
            parameters,
            files,
            outline_entities: args.outline,
            client_id,
            session_token: Some(session.to_owned()),
        };

        let (record, _argv, result) = self.engine.execute(app, &request, session)?;
        let kind = classify_output(&result.stdout);
        let lints = match kind {
            OutputKind::Eiout => lint_output(&result.stdout, &record, &virtual_paths),
            OutputKind::PlainText => Vec::new(),
        };
        let (encoding, output) = encode_bytes(&result.stdout);
        tracing::info!(
            execid = %record.execid,
            exit_code = ?result.exit_code,
            timed_out = result.timed_out,
            bytes = result.stdout.len(),
            "finished"
        );
        Ok(Reply::ok(ExecutePayload {
            execid: record.execid,
            kind,
            output,
            encoding,
            exit_code: result.exit_code,
            timed_out: result.timed_out,
            truncated: result.truncated,
            duration_s: result.duration.as_secs_f64(),
            lints,
        }))
    }

    fn apps(&self, args: AppsArgs) -> Result<Reply, Failure> {
        let registry = self.registry();
        match args.app_id {
            Some(id) => {
                let app = registry
                    .app(&id)
                    .ok_or_else(|| Failure::new(ErrorCode::NoSuchApp, format!("no such app: {id}")))?;
                Ok(Reply::ok(AppPayload { app: app.into() }))
            }
            None => Ok(Reply::ok(AppsPayload { apps: registry.list_apps(false) })),
        }
    }

    fn examples(&self, args: ExamplesArgs) -> Result<Reply, Failure> {
        let registry = self.registry();
        let example_sets = match args.ids {
            None => registry.example_sets().cloned().collect(),
            Some(ids) => ids
                .iter()
                .map(|id| {
                    registry
                        .example_set(id)
                        .cloned()
                        .ok_or_else(|| Failure::new(ErrorCode::NotFound, format!("no example set {id:?}")))
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(Reply::ok(ExamplesPayload { example_sets }))
    }

    fn fetch_output(&self, args: FetchOutputArgs) -> Result<Reply, Failure> {
        let set = self.engine.fetch_stream(&args.execid, args.cursor)?;
        let chunks = set
            .chunks
            .into_iter()
            .map(|c| {
                let (encoding, data) = encode_bytes(&c.data);
                WireChunk { index: c.index, encoding, data }
            })
            .collect();
        Ok(Reply::ok(FetchOutputPayload {
            execid: args.execid,
            chunks,
            next_cursor: set.next_cursor,
            live: set.live,
        }))
    }

    fn download_file(&self, execid: &ExecId, filename: &str) -> Result<Reply, Failure> {
        let file = self.engine.resolve_download(execid, filename)?;
        let bytes = std::fs::read(&file.path).map_err(|e| Failure::from(EngineError::Io(e)))?;
        Ok(Reply {
            status: 200,
            body: Body::File { bytes, media_type: file.media_type, filename: filename.to_owned() },
            set_cookie: None,
        })
    }
}

/// Markers may name a file by its request path or by its path on disk.
fn lint_output(stdout: &[u8], record: &ei_core::engine::ExecutionRecord, virtual_paths: &[String]) -> Vec<LintInfo> {
    let text = String::from_utf8_lossy(stdout);
    match eiout::parse(text.trim()) {
        Ok(doc) => {
            let files = record
                .input_files
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .chain(virtual_paths.iter().cloned());
            let ctx = LintContext::new(files, [record.execid.clone()]);
            eiout::validate(&doc, &ctx)
                .into_iter()
                .map(|l| LintInfo { code: l.code().to_owned(), message: l.to_string() })
                .collect()
        }
        Err(e) => vec![LintInfo { code: "parse-error".into(), message: e.to_string() }],
    }
}

fn log_diagnostics(registry: &Registry) {
    for d in registry.diagnostics() {
        match d.severity {
            Severity::Warning => tracing::warn!("{d}"),
            Severity::Fatal => tracing::error!("{d}"),
        }
    }
    tracing::info!(
        apps = registry.apps().count(),
        example_sets = registry.example_sets().count(),
        "registry loaded"
    );
}
