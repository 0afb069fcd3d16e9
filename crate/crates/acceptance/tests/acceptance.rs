//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances are the constants below.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use ei_client::{Client, ClientError};
use ei_core::command::Argv;
use ei_core::config::{load_registry, ConfigDefaults};
use ei_core::eiout::{self, arbitrary::random_document, EiAction, EiCommand, LineRegion, Outclass};
use ei_core::engine::Engine;
use ei_core::protocol::{ErrorCode, ExecuteArgs, ExecutePayload, FileArg, OutputKind, ParamValue};
use ei_core::ExecId;
use ei_gateway::session::SessionKeys;
use ei_gateway::{classify_output, BackgroundServer, Gateway, ServerConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use tempfile::TempDir;

const ARGV_LIMIT: Duration = Duration::from_secs(1);
const FUZZ_CASES: usize = 250;
const TIMEOUT_WALL_LIMIT: Duration = Duration::from_secs(2);
const STREAM_RUNS: usize = 50;
const STREAM_CHUNKS: usize = 5;
const STREAM_LIMIT: Duration = Duration::from_secs(10);
const DOWNLOAD_BYTES: usize = 1 << 20;
const ROUND_TRIP_DOCS: usize = 1000;
const ROUND_TRIP_LIMIT: Duration = Duration::from_secs(5);

const ARGV_ECHO: &str = env!("CARGO_BIN_EXE_argv-echo");
const SLEEPER: &str = env!("CARGO_BIN_EXE_sleeper");
const STREAM_WRITER: &str = env!("CARGO_BIN_EXE_stream-writer");
const DOWNLOAD_MAKER: &str = env!("CARGO_BIN_EXE_download-maker");
const EIOUT_DEMO: &str = env!("CARGO_BIN_EXE_eiout-demo");

fn core_data(name: &str) -> String {
    let path = format!("{}/../core/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

struct Suite {
    dir: TempDir,
    server: BackgroundServer,
    spawned: Arc<Mutex<Vec<Vec<String>>>>,
}

fn app_xml(id: &str, cmdline: &str, timeout: u64, params: &str) -> String {
    format!(
        r#"<app id="{id}" visible="true"><execinfo method="cmdline" timeout="{timeout}"><cmdlineapp>{cmdline}</cmdlineapp></execinfo>{params}</app>"#
    )
}

impl Suite {
    fn start() -> Suite {
        let dir = TempDir::new().unwrap();
        let apps = dir.path().join("apps");
        fs::create_dir_all(&apps).unwrap();
        let myapp = core_data("myapp.xml").replace("/path-to/myapp", ARGV_ECHO);
        let checked = myapp.replace(r#"id="myapp""#, r#"id="myapp-checked""#).replace(r#"check="false""#, r#"check="true""#);
        fs::write(apps.join("myapp.xml"), myapp).unwrap();
        fs::write(apps.join("myapp-checked.xml"), checked).unwrap();
        let files = [
            ("session", format!("{ARGV_ECHO} _ei_sessionid"), 5),
            ("sleeper", format!("{SLEEPER} 10"), 1),
            ("stream", format!("{STREAM_WRITER} _ei_stream _ei_execid _ei_download {STREAM_CHUNKS} 50"), 5),
            ("offer", format!("{DOWNLOAD_MAKER} _ei_download _ei_files"), 5),
            ("demo", format!("{EIOUT_DEMO} _ei_execid _ei_files"), 5),
        ];
        for (id, cmdline, timeout) in files {
            fs::write(apps.join(format!("{id}.xml")), app_xml(id, &cmdline, timeout, "")).unwrap();
        }

        let registry = load_registry(&apps, &ConfigDefaults::default()).unwrap();
        let spawned = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&spawned);
        let engine = Engine::new(&dir.path().join("state")).unwrap().with_spawn_observer(Arc::new(move |argv: &Argv| {
            let mut all = vec![argv.program().to_owned()];
            all.extend(argv.args().iter().cloned());
            log.lock().unwrap().push(all);
        }));
        let gateway = Arc::new(Gateway::new(registry, engine, SessionKeys::random(Duration::from_secs(3600))));
        let config = ServerConfig { listen: "127.0.0.1:0".parse().unwrap(), ..ServerConfig::default() };
        let server = BackgroundServer::start(gateway, &config).unwrap();
        Suite { dir, server, spawned }
    }

    fn client(&self) -> Client {
        Client::new(self.server.endpoint()).unwrap()
    }

    fn spawn_count(&self) -> usize {
        self.spawned.lock().unwrap().len()
    }
}

fn execute(client: &Client, app: &str, params: &[(&str, &str)]) -> Result<ExecutePayload, ClientError> {
    let mut parameters = BTreeMap::new();
    for (k, v) in params {
        parameters.insert(k.to_string(), ParamValue::Many(vec![v.to_string()]));
    }
    client.execute(ExecuteArgs { app_id: app.into(), parameters, ..Default::default() })
}

fn echoed_argv(payload: &ExecutePayload) -> Result<(Vec<String>, u32), String> {
    let v: Value = serde_json::from_str(&payload.output).map_err(|e| format!("argv-echo output: {e}"))?;
    let argv = v["argv"].as_array().ok_or("no argv")?.iter().map(|a| a.as_str().unwrap_or_default().to_owned()).collect();
    Ok((argv, v["ppid"].as_u64().ok_or("no ppid")? as u32))
}

fn check(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn myapp_argv(s: &Suite) -> Result<String, String> {
    let start = Instant::now();
    let payload = execute(&s.client(), "myapp", &[("c", "1")]).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (argv, _) = echoed_argv(&payload)?;
    check(argv == [ARGV_ECHO, "-c", "1"], || format!("argv {argv:?}"))?;
    check(elapsed < ARGV_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("argv [<myapp>, \"-c\", \"1\"] in {elapsed:.0?}"))
}

fn fuzzed_value(rng: &mut StdRng) -> String {
    const PIECES: &[&str] = &[
        ";", "|", "&", "&&", "||", "$", "$(id)", "`id`", "${HOME}", ">", ">>", "<", "*", "?", "[a]", "~", "!", "#",
        "'", "\"", "\\", "\n", "\t", " ", "(", ")", "{", "}", "rm -rf /", "-c", "--", "=", "%s", "é", "\u{202e}",
        "_ei_parameters", "../",
    ];
    let n = rng.gen_range(0..6);
    let mut v = String::new();
    for _ in 0..n {
        if rng.gen_bool(0.7) {
            v.push_str(PIECES[rng.gen_range(0..PIECES.len())]);
        } else {
            v.push(rng.gen_range(' '..='~'));
        }
    }
    v
}

fn injection(s: &Suite) -> Result<String, String> {
    let client = s.client();
    let mut rng = StdRng::seed_from_u64(0x1413);
    let before = s.spawn_count();
    let me = std::process::id();
    for i in 0..FUZZ_CASES {
        let value = fuzzed_value(&mut rng);
        let payload = execute(&client, "myapp", &[("c", &value)]).map_err(|e| format!("case {i} {value:?}: {e}"))?;
        let (argv, ppid) = echoed_argv(&payload)?;
        check(argv == [ARGV_ECHO, "-c", value.as_str()], || format!("case {i}: sent {value:?}, got {argv:?}"))?;
        check(ppid == me, || format!("case {i}: parent {ppid} is not the gateway {me}"))?;
    }
    let spawned = s.spawned.lock().unwrap()[before..].to_vec();
    check(spawned.len() == FUZZ_CASES, || format!("{} spawns for {FUZZ_CASES} requests", spawned.len()))?;
    check(spawned.iter().all(|a| a[0] == ARGV_ECHO), || "a process other than the fixture was spawned".into())?;
    Ok(format!("{FUZZ_CASES} values, each one argv token, only the fixture spawned"))
}

fn safety_negative(s: &Suite) -> Result<String, String> {
    let client = s.client();
    match execute(&client, "myapp-checked", &[("c", "3")]) {
        Err(ClientError::Gateway(body)) => {
            check(body.code == ErrorCode::InvalidParameters, || format!("code {:?}", body.code))?;
            check(body.violations.len() == 1 && body.violations[0].param == "c", || {
                format!("violations {:?}", body.violations)
            })?;
        }
        other => return Err(format!("check=true accepted \"3\": {other:?}")),
    }
    let payload = execute(&client, "myapp", &[("c", "3")]).map_err(|e| e.to_string())?;
    let (argv, _) = echoed_argv(&payload)?;
    check(argv == [ARGV_ECHO, "-c", "3"], || format!("check=false argv {argv:?}"))?;
    Ok("check=true: violation on c; check=false: literal token".into())
}

fn timeout(s: &Suite) -> Result<String, String> {
    let start = Instant::now();
    let payload = execute(&s.client(), "sleeper", &[]).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(payload.timed_out, || "not flagged timed_out".into())?;
    check(payload.exit_code.is_none(), || format!("exit code {:?}", payload.exit_code))?;
    check(elapsed < TIMEOUT_WALL_LIMIT, || format!("returned after {elapsed:?}"))?;
    Ok(format!("10 s sleep stopped after {elapsed:.2?}"))
}

fn poll_stream(client: &Client, execid: &ExecId, rng: &mut StdRng) -> Result<Vec<u8>, String> {
    let mut cursor = 0;
    let mut bytes = Vec::new();
    let deadline = Instant::now() + STREAM_LIMIT;
    loop {
        let set = client.fetch_output(execid, cursor).map_err(|e| e.to_string())?;
        for chunk in &set.chunks {
            check(chunk.index == cursor, || format!("chunk {} delivered at cursor {cursor}", chunk.index))?;
            bytes.extend(ei_core::protocol::decode_bytes(chunk.encoding, &chunk.data).map_err(|e| e.to_string())?);
            cursor += 1;
        }
        check(set.next_cursor == cursor, || format!("next_cursor {} after {cursor} chunks", set.next_cursor))?;
        if !set.live && set.chunks.is_empty() {
            return Ok(bytes);
        }
        check(Instant::now() < deadline, || "stream never finished".into())?;
        std::thread::sleep(Duration::from_millis(rng.gen_range(0..100)));
    }
}

fn stream_run(s: &Suite, seed: u64) -> Result<(), String> {
    let client = s.client();
    let mut rng = StdRng::seed_from_u64(seed);
    let payload = execute(&client, "stream", &[]).map_err(|e| e.to_string())?;
    let doc = eiout::parse(payload.output.trim()).map_err(|e| e.to_string())?;
    let hint = doc.stream_hints().first().map(|h| h.execid.clone()).ok_or("no stream hint")?;
    check(hint == payload.execid, || "hint names another execution".into())?;
    let got = poll_stream(&client, &hint, &mut rng)?;
    let expected = client.download(&hint, "writer.log").map_err(|e| e.to_string())?;
    check(!expected.is_empty(), || "writer wrote nothing".into())?;
    check(got == expected, || format!("run {seed}: got {} bytes, writer wrote {}", got.len(), expected.len()))
}

fn stream(s: &Suite) -> Result<String, String> {
    let start = Instant::now();
    let results: Vec<Result<(), String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..STREAM_RUNS as u64).map(|seed| scope.spawn(move || stream_run(s, seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("poller panicked".into()))).collect()
    });
    let elapsed = start.elapsed();
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    check(failures.is_empty(), || format!("{} of {STREAM_RUNS} runs failed: {}", failures.len(), failures[0]))?;
    check(elapsed < STREAM_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{STREAM_RUNS} runs of {STREAM_CHUNKS} chunks byte-exact, exactly once, in {elapsed:.2?}"))
}

fn download(s: &Suite) -> Result<String, String> {
    let client = s.client();
    let mut rng = StdRng::seed_from_u64(0xd0);
    let data: Vec<u8> = (0..DOWNLOAD_BYTES).map(|_| rng.gen()).collect();
    let args = ExecuteArgs {
        app_id: "offer".into(),
        files: vec![FileArg::new("blob.bin", &data)],
        ..Default::default()
    };
    let payload = client.execute(args).map_err(|e| e.to_string())?;
    let got = client.download(&payload.execid, "blob.bin").map_err(|e| e.to_string())?;
    check(got == data, || format!("{} bytes back, differ from the {} sent", got.len(), data.len()))?;
    for bad in ["../blob.bin", "../../etc/passwd", ".."] {
        match client.download(&payload.execid, bad) {
            Err(e) if e.code() == Some(ErrorCode::BadRequest) => {}
            other => return Err(format!("{bad:?}: {:?}", other.map(|b| b.len()))),
        }
    }
    match client.download(&payload.execid, "nothing.bin") {
        Err(e) if e.code() == Some(ErrorCode::NotFound) => {}
        other => return Err(format!("unknown file: {:?}", other.map(|b| b.len()))),
    }
    Ok("1 MiB byte-identical; ../ is bad-request; unknown is not-found".into())
}

fn listings() -> Result<(), String> {
    let doc = eiout::parse(&core_data("highlight_and_dialog.xml")).map_err(|e| e.to_string())?;
    let [EiCommand::HighlightLines(h)] = doc.commands.as_slice() else { return Err(format!("{doc:?}")) };
    check(h.dest.as_deref() == Some("/path-to/sum.c") && h.regions == [LineRegion::range(5, 10)], || format!("{h:?}"))?;
    let [EiAction::OnCodeLineClick(a)] = doc.actions.as_slice() else { return Err(format!("{doc:?}")) };
    check(a.outclass == Outclass::Info && a.lines == [LineRegion::line(17)], || format!("{a:?}"))?;
    let [EiCommand::DialogBox(d)] = a.commands.as_slice() else { return Err(format!("{a:?}")) };
    check(d.title == "Hey!" && d.contents[0].body == "some message", || format!("{d:?}"))?;

    let doc = eiout::parse(&core_data("stream_content.xml")).map_err(|e| e.to_string())?;
    let [EiCommand::PrintOnConsole(p)] = doc.commands.as_slice() else { return Err(format!("{doc:?}")) };
    let hint = p.contents[0].stream.as_ref().ok_or("no stream hint")?;
    check(hint.execid.as_str() == "EI65231" && hint.interval_secs == 60.0, || format!("{hint:?}"))?;

    let doc = eiout::parse(&core_data("download.xml")).map_err(|e| e.to_string())?;
    let [EiCommand::Download(d)] = doc.commands.as_slice() else { return Err(format!("{doc:?}")) };
    check(d.execid.as_str() == "EI65231" && d.filename == "file.zip", || format!("{d:?}"))
}

fn eiout_round_trip(_: &Suite) -> Result<String, String> {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xe1);
    for i in 0..ROUND_TRIP_DOCS {
        let doc = random_document(&mut rng);
        let xml = eiout::serialize(&doc).map_err(|e| format!("document {i}: {e}"))?;
        let back = eiout::parse(&xml).map_err(|e| format!("document {i}: {e}"))?;
        check(back == doc, || format!("document {i} changed:\n{xml}"))?;
    }
    listings()?;
    let elapsed = start.elapsed();
    check(elapsed < ROUND_TRIP_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{ROUND_TRIP_DOCS} documents and 3 listings in {elapsed:.2?}"))
}

fn classification(_: &Suite) -> Result<String, String> {
    let snippet = core_data("highlight_and_dialog.xml");
    let truncated = &snippet[..snippet.len() / 2];
    for (name, input, expected) in [
        ("output snippet", snippet.as_str(), OutputKind::Eiout),
        ("Hello World", "Hello World", OutputKind::PlainText),
        ("truncated XML", truncated, OutputKind::PlainText),
    ] {
        let got = classify_output(input.as_bytes());
        check(got == expected, || format!("{name}: {got:?}"))?;
    }
    Ok("snippet is eiout; Hello World and truncated XML are plain-text".into())
}

fn sessions(s: &Suite) -> Result<String, String> {
    let token = |c: &Client| -> Result<String, String> {
        let payload = execute(c, "session", &[]).map_err(|e| e.to_string())?;
        let (argv, _) = echoed_argv(&payload)?;
        argv.get(1).cloned().ok_or_else(|| format!("argv {argv:?}"))
    };
    let first = s.client();
    let tokens = [token(&first)?, token(&first)?, token(&first)?];
    check(tokens.iter().all(|t| *t == tokens[0]), || format!("tokens differ: {tokens:?}"))?;
    let other = token(&s.client())?;
    check(other != tokens[0], || "a cookie-less client got the same session".into())?;
    Ok("three calls share one token; a second client gets another".into())
}

/// Replace execids and the execution workdir so output can be compared
/// across runs.
fn normalize(text: &str, workdir_root: &Path) -> String {
    let text = text.replace(&workdir_root.display().to_string(), "<WORK>");
    let mut out = String::with_capacity(text.len());
    let mut rest = text.as_str();
    while let Some(at) = rest.find("EI") {
        out.push_str(&rest[..at]);
        let tail = &rest[at + 2..];
        let hex = tail.bytes().take_while(u8::is_ascii_hexdigit).count();
        if hex == 24 {
            out.push_str("<EXECID>");
            rest = &tail[24..];
        } else {
            out.push_str("EI");
            rest = tail;
        }
    }
    out.push_str(rest);
    out
}

fn ei(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["ei"];
    argv.extend_from_slice(args);
    let code = ei_client::run(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

fn terminal_client(s: &Suite) -> Result<String, String> {
    let endpoint = s.server.endpoint();
    let input = s.dir.path().join("sum.c");
    fs::write(&input, "int main() { return 0; }\n").unwrap();
    let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/eiout_demo.txt");
    let golden = fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;

    let (code, out, err) = ei(&["run", "--server", &endpoint, "demo", "--file", input.to_str().unwrap()]);
    check(code == 0, || format!("exit {code}: {err}"))?;
    let work = s.dir.path().join("state/work");
    let got = normalize(&out, &work);
    check(got == golden, || format!("output differs from golden:\n{got}"))?;

    let cases: [(&[&str], i32, &str); 4] = [
        (&["run", "--server", &endpoint, "sleeper"], 1, "tool timed out"),
        (&["run", "--server", &endpoint, "nosuch"], 2, "unknown app"),
        (&["apps", "--server", "http://127.0.0.1:1/ei/server"], 3, "unreachable gateway"),
        (&["run"], 64, "missing app argument"),
    ];
    for (args, expected, what) in cases {
        let (code, _, err) = ei(args);
        check(code == expected, || format!("{what}: exit {code}, wanted {expected}: {err}"))?;
    }
    Ok("render matches golden; exit codes 0/1/2/3/64".into())
}

type Criterion = fn(&Suite) -> Result<String, String>;

fn main() {
    let suite = Suite::start();
    let criteria: [(&str, Criterion); 10] = [
        ("myapp argv", myapp_argv),
        ("injection suite", injection),
        ("safety negative", safety_negative),
        ("timeout", timeout),
        ("stream protocol", stream),
        ("download protocol", download),
        ("eiout round trip", eiout_round_trip),
        ("classify_output", classification),
        ("session threading", sessions),
        ("terminal client end-to-end", terminal_client),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&suite)))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
