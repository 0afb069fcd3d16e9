//! Execution records, running tools under limits, and the stream and
//! download protocols.
//!
//! Every execution gets three private directories under the state root:
//! `work/<execid>` (cwd, uploaded files), `stream/<execid>` and
//! `download/<execid>`. The `work`, `stream` and `download` parents are
//! write+search only, so a tool cannot list them to find other executions.
//!
//! A tool that keeps producing output after it exits publishes chunks into
//! its stream directory as `000000.out`, `000001.out`, ... by writing a
//! temporary file and renaming it into place, and keeps a file named
//! `running` there for as long as more chunks may follow.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Read};
use std::os::unix::fs::{DirBuilderExt, PermissionsExt};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime};

use serde::Serialize;

use crate::command::{
    materialize_files, serialize_parameters, validate_parameters, Argv, ExecutionRequest, ExpansionContext,
    FileError, Violation,
};
use crate::config::AppSpec;
use crate::ExecId;

/// Name of the liveness sentinel in a stream directory.
pub const SENTINEL: &str = "running";

/// How long to wait for stdout to close after the tool itself has exited.
/// Background children that inherited the pipe would otherwise hold the
/// request open.
const PIPE_GRACE: Duration = Duration::from_millis(200);
const POLL: Duration = Duration::from_millis(10);
const STDERR_LOG_LIMIT: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecState {
    Created,
    Running,
    Finished,
    TimedOut,
    Failed,
}

impl ExecState {
    pub fn is_terminal(self) -> bool {
        matches!(self, ExecState::Finished | ExecState::TimedOut | ExecState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub timeout: Duration,
    pub max_output_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionRecord {
    pub execid: ExecId,
    pub app_id: String,
    pub workdir: PathBuf,
    pub stream_dir: PathBuf,
    pub download_dir: PathBuf,
    pub state: ExecState,
    pub created_at: SystemTime,
    pub limits: Limits,
    /// Absolute paths of the uploaded files, in request order.
    pub input_files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    /// `None` when the run timed out. A tool killed by signal `n` reports
    /// `128 + n`.
    pub exit_code: Option<i32>,
    pub stdout: Vec<u8>,
    pub truncated: bool,
    pub timed_out: bool,
    pub duration: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub index: u64,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSet {
    pub chunks: Vec<Chunk>,
    pub next_cursor: u64,
    /// Whether more chunks may still appear.
    pub live: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadFile {
    pub path: PathBuf,
    pub media_type: String,
    pub len: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid parameters")]
    InvalidParameters(Vec<Violation>),
    #[error(transparent)]
    BadFile(#[from] FileError),
    #[error("tool unavailable: {program}")]
    ToolUnavailable { program: String },
    #[error("not allowed to run {program}: {source}")]
    SpawnDenied {
        program: String,
        #[source]
        source: io::Error,
    },
    #[error("unknown execution {0}")]
    NotFound(ExecId),
    #[error("execution {0} has expired")]
    Gone(ExecId),
    #[error("execution {0} was already started")]
    AlreadyStarted(ExecId),
    #[error("{0:?} is not a plain file name")]
    BadFilename(String),
    #[error("no file {filename:?} for execution {execid}")]
    NoSuchFile { execid: ExecId, filename: String },
    #[error("state directory: {0}")]
    Io(#[from] io::Error),
}

/// Called with the argv of every process the engine is about to spawn.
pub type SpawnObserver = Arc<dyn Fn(&Argv) + Send + Sync>;

enum Slot {
    Live(ExecutionRecord),
    Reaped,
}

pub struct Engine {
    work: PathBuf,
    stream: PathBuf,
    download: PathBuf,
    records: Mutex<HashMap<ExecId, Slot>>,
    observer: Option<SpawnObserver>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("work", &self.work).finish_non_exhaustive()
    }
}

const PARENT_MODE: u32 = 0o300;

impl Engine {
    /// Open the state root, creating it if needed. Leftover execution
    /// directories from an earlier server are removed.
    pub fn new(state_root: &Path) -> io::Result<Engine> {
        fs::DirBuilder::new().recursive(true).mode(0o700).create(state_root)?;
        let root = state_root.canonicalize()?;
        if root.to_str().is_none() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "state root must be a UTF-8 path"));
        }
        let mut dirs = Vec::new();
        for name in ["work", "stream", "download"] {
            let dir = root.join(name);
            match fs::DirBuilder::new().mode(0o700).create(&dir) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    fs::set_permissions(&dir, fs::Permissions::from_mode(0o700))?;
                    for entry in fs::read_dir(&dir)? {
                        let entry = entry?;
                        if entry.file_name().to_string_lossy().starts_with("EI") {
                            fs::remove_dir_all(entry.path())?;
                        }
                    }
                }
                Err(e) => return Err(e),
            }
            fs::set_permissions(&dir, fs::Permissions::from_mode(PARENT_MODE))?;
            dirs.push(dir);
        }
        let [work, stream, download] = <[PathBuf; 3]>::try_from(dirs).unwrap();
        Ok(Engine { work, stream, download, records: Mutex::new(HashMap::new()), observer: None })
    }

    pub fn with_spawn_observer(mut self, observer: SpawnObserver) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn record(&self, execid: &ExecId) -> Result<ExecutionRecord, EngineError> {
        match self.records.lock().unwrap().get(execid) {
            Some(Slot::Live(r)) => Ok(r.clone()),
            Some(Slot::Reaped) => Err(EngineError::Gone(execid.clone())),
            None => Err(EngineError::NotFound(execid.clone())),
        }
    }

    fn set_state(&self, execid: &ExecId, state: ExecState) {
        if let Some(Slot::Live(r)) = self.records.lock().unwrap().get_mut(execid) {
            r.state = state;
        }
    }

    /// Allocate an execution id and its directories and write the uploaded
    /// files. The request is assumed to be validated.
    pub fn create_execution(&self, app: &AppSpec, req: &ExecutionRequest) -> Result<ExecutionRecord, EngineError> {
        let execid = {
            let mut records = self.records.lock().unwrap();
            let mut id = ExecId::generate();
            while records.contains_key(&id) {
                id = ExecId::generate();
            }
            let placeholder = ExecutionRecord {
                execid: id.clone(),
                app_id: app.id.clone(),
                workdir: self.work.join(id.as_ref()),
                stream_dir: self.stream.join(id.as_ref()),
                download_dir: self.download.join(id.as_ref()),
                state: ExecState::Created,
                created_at: SystemTime::now(),
                limits: Limits {
                    timeout: Duration::from_secs(app.timeout_s),
                    max_output_bytes: app.max_output_bytes,
                },
                input_files: Vec::new(),
            };
            records.insert(id.clone(), Slot::Live(placeholder));
            id
        };
        let mut record = self.record(&execid)?;
        let setup = || -> Result<Vec<PathBuf>, EngineError> {
            for dir in [&record.workdir, &record.stream_dir, &record.download_dir] {
                fs::DirBuilder::new().mode(0o700).create(dir)?;
            }
            Ok(materialize_files(&req.files, &record.workdir)?)
        };
        match setup() {
            Ok(files) => record.input_files = files,
            Err(e) => {
                self.records.lock().unwrap().remove(&execid);
                remove_dirs(&record);
                return Err(e);
            }
        }
        if let Some(Slot::Live(r)) = self.records.lock().unwrap().get_mut(&execid) {
            r.input_files = record.input_files.clone();
        }
        Ok(record)
    }

    /// Run `argv` for a created execution and capture its stdout.
    pub fn run(&self, execid: &ExecId, argv: &Argv) -> Result<ExecutionResult, EngineError> {
        let record = {
            let mut records = self.records.lock().unwrap();
            match records.get_mut(execid) {
                Some(Slot::Live(r)) if r.state == ExecState::Created => {
                    r.state = ExecState::Running;
                    r.clone()
                }
                Some(Slot::Live(_)) => return Err(EngineError::AlreadyStarted(execid.clone())),
                Some(Slot::Reaped) => return Err(EngineError::Gone(execid.clone())),
                None => return Err(EngineError::NotFound(execid.clone())),
            }
        };
        if let Some(observe) = &self.observer {
            observe(argv);
        }
        let result = run_process(argv, &record.workdir, record.limits);
        let state = match &result {
            Ok(r) if r.timed_out => ExecState::TimedOut,
            Ok(_) => ExecState::Finished,
            Err(_) => ExecState::Failed,
        };
        self.set_state(execid, state);
        result
    }

    /// Validate, create, build the argv and run: the whole `execute` flow.
    pub fn execute(
        &self,
        app: &AppSpec,
        req: &ExecutionRequest,
        session_id: &str,
    ) -> Result<(ExecutionRecord, Argv, ExecutionResult), EngineError> {
        validate_parameters(&app.params, &req.parameters).map_err(EngineError::InvalidParameters)?;
        let record = self.create_execution(app, req)?;
        let ctx = ExpansionContext {
            serialized_params: serialize_parameters(&app.params, &req.parameters),
            file_paths: record.input_files.clone(),
            outline_tokens: req.outline_entities.clone(),
            execid: record.execid.clone(),
            stream_dir: record.stream_dir.clone(),
            download_dir: record.download_dir.clone(),
            session_id: session_id.to_owned(),
            client_id: req.client_id.clone(),
        };
        let argv = app.template.expand(&ctx);
        tracing::info!(execid = %record.execid, app = %app.id, argv = %argv.preview(), "running");
        let result = self.run(&record.execid, &argv)?;
        let record = self.record(&record.execid)?;
        Ok((record, argv, result))
    }

    /// Chunks `cursor, cursor+1, ...` as far as they are contiguous.
    pub fn fetch_stream(&self, execid: &ExecId, cursor: u64) -> Result<ChunkSet, EngineError> {
        let record = self.record(execid)?;
        // Liveness is read before listing: once the sentinel is gone every
        // chunk has been published, so an empty tail really is the end.
        let live = record.state == ExecState::Running || record.stream_dir.join(SENTINEL).exists();
        let mut published = BTreeMap::new();
        for entry in fs::read_dir(&record.stream_dir)? {
            let entry = entry?;
            if let Some(index) = entry.file_name().to_str().and_then(chunk_index) {
                if index >= cursor {
                    published.insert(index, entry.path());
                }
            }
        }
        let mut chunks = Vec::new();
        let mut next = cursor;
        while let Some(path) = published.get(&next) {
            chunks.push(Chunk { index: next, data: fs::read(path)? });
            next += 1;
        }
        Ok(ChunkSet { chunks, next_cursor: next, live })
    }

    /// Locate `filename` in the execution's download directory.
    pub fn resolve_download(&self, execid: &ExecId, filename: &str) -> Result<DownloadFile, EngineError> {
        if !crate::eiout::is_bare_filename(filename) {
            return Err(EngineError::BadFilename(filename.to_owned()));
        }
        let record = self.record(execid)?;
        let path = record.download_dir.join(filename);
        let missing = || EngineError::NoSuchFile { execid: execid.clone(), filename: filename.to_owned() };
        match fs::symlink_metadata(&path) {
            Ok(m) if m.is_file() => Ok(DownloadFile {
                media_type: mime_guess::from_path(&path).first_or_octet_stream().essence_str().to_owned(),
                path,
                len: m.len(),
            }),
            Ok(_) => Err(missing()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(missing()),
            Err(e) => Err(e.into()),
        }
    }

    /// Delete finished executions created more than `ttl` ago.
    pub fn reap_expired(&self, ttl: Duration) -> usize {
        self.reap_expired_at(SystemTime::now(), ttl)
    }

    pub fn reap_expired_at(&self, now: SystemTime, ttl: Duration) -> usize {
        let expired: Vec<ExecutionRecord> = {
            let mut records = self.records.lock().unwrap();
            let ids: Vec<ExecId> = records
                .iter()
                .filter_map(|(id, slot)| match slot {
                    Slot::Live(r)
                        if r.state.is_terminal()
                            && now.duration_since(r.created_at).is_ok_and(|age| age > ttl) =>
                    {
                        Some(id.clone())
                    }
                    _ => None,
                })
                .collect();
            ids.into_iter()
                .filter_map(|id| match records.insert(id, Slot::Reaped) {
                    Some(Slot::Live(r)) => Some(r),
                    _ => None,
                })
                .collect()
        };
        for r in &expired {
            remove_dirs(r);
            tracing::debug!(execid = %r.execid, "reaped");
        }
        expired.len()
    }
}

fn remove_dirs(r: &ExecutionRecord) {
    for dir in [&r.workdir, &r.stream_dir, &r.download_dir] {
        if let Err(e) = fs::remove_dir_all(dir) {
            if e.kind() != io::ErrorKind::NotFound {
                tracing::warn!(dir = %dir.display(), error = %e, "cannot remove execution directory");
            }
        }
    }
}

/// Index of a chunk file name: six or more decimal digits then `.out`.
fn chunk_index(name: &str) -> Option<u64> {
    let digits = name.strip_suffix(".out")?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Default)]
struct Captured {
    bytes: Vec<u8>,
    truncated: bool,
}

/// Spawn `argv` directly (no shell) in its own process group, with a
/// scrubbed environment, and collect stdout up to the output limit. On
/// timeout the whole process group is killed.
pub fn run_process(argv: &Argv, workdir: &Path, limits: Limits) -> Result<ExecutionResult, EngineError> {
    let start = Instant::now();
    let mut cmd = Command::new(argv.program());
    cmd.args(argv.args())
        .current_dir(workdir)
        .env_clear()
        .env("HOME", workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    for key in ["PATH", "LANG"] {
        if let Some(value) = std::env::var_os(key) {
            cmd.env(key, value);
        }
    }
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => EngineError::ToolUnavailable { program: argv.program().to_owned() },
        _ => EngineError::SpawnDenied { program: argv.program().to_owned(), source: e },
    })?;
    let pgid = child.id() as libc::pid_t;

    let captured = Arc::new(Mutex::new(Captured::default()));
    let (done_tx, done_rx) = mpsc::channel();
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let sink = Arc::clone(&captured);
    let max = usize::try_from(limits.max_output_bytes).unwrap_or(usize::MAX);
    thread::spawn(move || {
        let mut buf = [0u8; 64 * 1024];
        loop {
            match stdout.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let mut c = sink.lock().unwrap();
                    let room = max.saturating_sub(c.bytes.len());
                    if n > room {
                        c.truncated = true;
                    }
                    c.bytes.extend_from_slice(&buf[..n.min(room)]);
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(_) => break,
            }
        }
        let _ = done_tx.send(());
    });

    let mut stderr = child.stderr.take().expect("stderr is piped");
    let program = argv.program().to_owned();
    thread::spawn(move || {
        let mut logged = Vec::new();
        let mut buf = [0u8; 8192];
        while let Ok(n) = stderr.read(&mut buf) {
            if n == 0 {
                break;
            }
            let room = STDERR_LOG_LIMIT.saturating_sub(logged.len());
            logged.extend_from_slice(&buf[..n.min(room)]);
        }
        if !logged.is_empty() {
            tracing::info!(program = %program, stderr = %String::from_utf8_lossy(&logged), "tool stderr");
        }
    });

    let deadline = start + limits.timeout;
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            // SAFETY: killpg only sends a signal; pgid is the group created for this child.
            unsafe {
                libc::killpg(pgid, libc::SIGKILL);
            }
            break child.wait()?;
        }
        thread::sleep(POLL);
    };
    let _ = done_rx.recv_timeout(PIPE_GRACE);

    let exit_code = if timed_out { None } else { status.code().or_else(|| status.signal().map(|s| 128 + s)) };
    let c = std::mem::take(&mut *captured.lock().unwrap());
    Ok(ExecutionResult {
        exit_code,
        stdout: c.bytes,
        truncated: c.truncated,
        timed_out,
        duration: start.elapsed(),
    })
}
