use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use ei_core::eiout;
use ei_core::protocol::{decode_bytes, ErrorCode, ExecuteArgs, ExecutePayload, FileArg, OutputKind, ParamValue};
use ei_core::ExecId;

use crate::api::{Client, ClientError};

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:8080/ei/server";
pub const CLIENT_ID: &str = "cli";

pub const EXIT_OK: i32 = 0;
/// The tool failed, timed out, or a local file could not be written.
pub const EXIT_TOOL: i32 = 1;
/// The gateway refused the request.
pub const EXIT_GATEWAY: i32 = 2;
/// The gateway could not be reached.
pub const EXIT_TRANSPORT: i32 = 3;
/// Bad command line or unreadable input file.
pub const EXIT_USAGE: i32 = 64;

/// Run tools on an ei gateway from the terminal.
#[derive(Parser, Debug)]
#[command(name = "ei", version)]
struct Cli {
    /// Command endpoint of the gateway.
    #[arg(long, global = true, env = "EI_SERVER", default_value = DEFAULT_SERVER)]
    server: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an app and print its output.
    Run {
        app: String,
        /// `name=value`, or just `name` for a flag. Repeat a name to pass several values.
        #[arg(long = "param", short = 'p', value_name = "NAME[=VALUE]")]
        params: Vec<String>,
        /// Local file to upload. Relative paths keep their layout.
        #[arg(long = "file", short = 'f', value_name = "PATH")]
        files: Vec<PathBuf>,
        /// Outline entity passed to the tool.
        #[arg(long = "outline", value_name = "ENTITY")]
        outline: Vec<String>,
        /// Keep printing streamed output until the tool is done.
        #[arg(long)]
        follow: bool,
        /// Poll interval in seconds for `--follow`; defaults to the tool's hint.
        #[arg(long, value_name = "SECONDS")]
        interval: Option<f64>,
    },
    /// Print the streamed output of an execution.
    Follow {
        execid: ExecId,
        #[arg(long, default_value_t = 1.0, value_name = "SECONDS")]
        interval: f64,
    },
    /// Fetch a file an execution offered for download.
    Get {
        execid: ExecId,
        filename: String,
        /// Where to write; `-` for stdout. Defaults to the file name.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the available apps.
    Apps,
}

enum Failure {
    Usage(String),
    Client(ClientError),
    Local(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Client(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Local(e.to_string())
    }
}

/// Entry point of the `ei` binary; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = Client::new(&cli.server).map_err(Failure::from).and_then(|client| match cli.command {
        Command::Run { app, params, files, outline, follow, interval } => {
            run_app(&client, &app, &params, &files, outline, follow.then_some(interval), out, err)
        }
        Command::Follow { execid, interval } => {
            follow_stream(&client, &execid, seconds(interval)?, out)?;
            Ok(EXIT_OK)
        }
        Command::Get { execid, filename, output } => get(&client, &execid, &filename, output, out),
        Command::Apps => list_apps(&client, out),
    });
    let _ = out.flush();
    match result {
        Ok(code) => code,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "ei: {message}");
            EXIT_USAGE
        }
        Err(Failure::Local(message)) => {
            let _ = writeln!(err, "ei: {message}");
            EXIT_TOOL
        }
        Err(Failure::Client(e)) => {
            let _ = writeln!(err, "ei: {e}");
            if let ClientError::Gateway(body) = &e {
                for v in &body.violations {
                    let _ = writeln!(err, "  {}", v.message);
                }
            }
            match e {
                ClientError::Transport { .. } => EXIT_TRANSPORT,
                _ => EXIT_GATEWAY,
            }
        }
    }
}

fn seconds(s: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Failure::Usage(format!("interval must be a positive number of seconds, got {s}")))
}

fn parse_params(raw: &[String]) -> BTreeMap<String, ParamValue> {
    let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for p in raw {
        match p.split_once('=') {
            Some((name, value)) => values.entry(name.to_owned()).or_default().push(value.to_owned()),
            None => {
                values.entry(p.clone()).or_default();
            }
        }
    }
    values.into_iter().map(|(k, v)| (k, ParamValue::Many(v))).collect()
}

/// Relative paths without `..` keep their layout on the server; anything
/// else is sent under its file name.
fn upload_path(path: &Path) -> Option<String> {
    let keeps_layout = path.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    let chosen = if keeps_layout { path.to_path_buf() } else { PathBuf::from(path.file_name()?) };
    chosen.to_str().map(str::to_owned)
}

#[allow(clippy::too_many_arguments)]
fn run_app(
    client: &Client,
    app: &str,
    params: &[String],
    files: &[PathBuf],
    outline: Vec<String>,
    follow: Option<Option<f64>>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut uploads = Vec::with_capacity(files.len());
    for path in files {
        let bytes =
            std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let name = upload_path(path).ok_or_else(|| Failure::Usage(format!("unusable file name {}", path.display())))?;
        uploads.push(FileArg::new(name, &bytes));
    }
    let args = ExecuteArgs {
        app_id: app.to_owned(),
        parameters: parse_params(params),
        files: uploads,
        outline,
        client_id: Some(CLIENT_ID.to_owned()),
    };
    let payload = match client.execute(args) {
        Ok(p) => p,
        Err(e) if e.code() == Some(ErrorCode::NoSuchApp) => {
            let _ = writeln!(err, "ei: {e}");
            if let Ok(apps) = client.apps() {
                let ids: Vec<&str> = apps.apps.iter().map(|a| a.id.as_str()).collect();
                let _ = writeln!(err, "available apps: {}", ids.join(", "));
            }
            return Ok(EXIT_GATEWAY);
        }
        Err(e) => return Err(e.into()),
    };
    let streams = print_output(&payload, out, err)?;
    if let Some(interval) = follow {
        for (execid, hinted) in streams {
            follow_stream(client, &execid, seconds(interval.unwrap_or(hinted))?, out)?;
        }
    }
    report_status(app, &payload, err);
    Ok(if payload.timed_out || payload.exit_code != Some(0) { EXIT_TOOL } else { EXIT_OK })
}

/// Print the result; returns the streams the output points at.
fn print_output(
    payload: &ExecutePayload,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Vec<(ExecId, f64)>, Failure> {
    let bytes = decode_bytes(payload.encoding, &payload.output)
        .map_err(|e| Failure::Client(ClientError::Protocol { status: 200, message: e.to_string() }))?;
    if payload.kind == OutputKind::Eiout {
        let text = String::from_utf8_lossy(&bytes);
        match eiout::parse(text.trim()) {
            Ok(doc) => {
                let rendered = eiout::render_text(&doc);
                if !rendered.is_empty() {
                    writeln!(out, "{rendered}")?;
                }
                let mut streams: Vec<(ExecId, f64)> = Vec::new();
                for hint in doc.stream_hints() {
                    if !streams.iter().any(|(id, _)| *id == hint.execid) {
                        streams.push((hint.execid.clone(), hint.interval_secs));
                    }
                }
                return Ok(streams);
            }
            Err(e) => {
                let _ = writeln!(err, "ei: output is not valid eiout ({e}); showing it raw");
            }
        }
    }
    out.write_all(&bytes)?;
    Ok(Vec::new())
}

fn report_status(app: &str, payload: &ExecutePayload, err: &mut dyn Write) {
    if payload.truncated {
        let _ = writeln!(err, "ei: output was truncated by the server");
    }
    if payload.timed_out {
        let _ = writeln!(err, "ei: {app} timed out after {:.1}s", payload.duration_s);
    } else if let Some(code) = payload.exit_code.filter(|c| *c != 0) {
        let _ = writeln!(err, "ei: {app} exited with status {code}");
    }
}

/// Print chunks from the start until the stream is no longer live.
pub fn follow_stream(client: &Client, execid: &ExecId, interval: Duration, out: &mut dyn Write) -> Result<(), ClientError> {
    let mut cursor = 0;
    loop {
        let set = client.fetch_output(execid, cursor)?;
        for chunk in &set.chunks {
            let data = decode_bytes(chunk.encoding, &chunk.data)
                .map_err(|e| ClientError::Protocol { status: 200, message: e.to_string() })?;
            if out.write_all(&data).and_then(|_| out.flush()).is_err() {
                return Ok(());
            }
        }
        cursor = set.next_cursor;
        match (set.live, set.chunks.is_empty()) {
            (false, true) => return Ok(()),
            (true, true) => std::thread::sleep(interval),
            _ => {}
        }
    }
}

fn get(
    client: &Client,
    execid: &ExecId,
    filename: &str,
    output: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let bytes = client.download(execid, filename)?;
    match output {
        Some(p) if p.as_os_str() == "-" => out.write_all(&bytes)?,
        Some(p) => std::fs::write(&p, &bytes).map_err(|e| Failure::Local(format!("{}: {e}", p.display())))?,
        None => std::fs::write(filename, &bytes).map_err(|e| Failure::Local(format!("{filename}: {e}")))?,
    }
    Ok(EXIT_OK)
}

fn list_apps(client: &Client, out: &mut dyn Write) -> Result<i32, Failure> {
    let apps = client.apps()?.apps;
    let width = apps.iter().map(|a| a.id.len()).max().unwrap_or(0);
    for app in &apps {
        match &app.description {
            Some(d) => writeln!(out, "{:width$}  {} - {d}", app.id, app.title)?,
            None => writeln!(out, "{:width$}  {}", app.id, app.title)?,
        }
    }
    Ok(EXIT_OK)
}
