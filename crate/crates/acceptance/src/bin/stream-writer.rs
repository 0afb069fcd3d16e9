//! `stream-writer STREAM_DIR EXECID DOWNLOAD_DIR [CHUNKS] [INTERVAL_MS]`
//!
//! Marks the stream live, answers with an eiout stream hint and leaves a
//! detached copy of itself writing CHUNKS random chunks, one every
//! INTERVAL_MS. Each chunk is written to a temporary name and renamed into
//! place. Every byte written is also appended to `writer.log` in the
//! download directory so a reader can check what the stream should hold.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use rand::Rng;

#[allow(clippy::zombie_processes)]
fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.get(1).map(String::as_str) == Some("--child") {
        return child(&args[2..]);
    }
    let [_, stream, execid, download, rest @ ..] = args.as_slice() else {
        eprintln!("usage: stream-writer STREAM_DIR EXECID DOWNLOAD_DIR [CHUNKS] [INTERVAL_MS]");
        std::process::exit(64);
    };
    let chunks = rest.first().map(String::as_str).unwrap_or("5");
    let interval = rest.get(1).map(String::as_str).unwrap_or("50");
    fs::write(PathBuf::from(stream).join("running"), b"").expect("sentinel");
    let _writer = Command::new(std::env::current_exe().expect("own path"))
        .args(["--child", stream, download, chunks, interval])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .process_group(0)
        .spawn()
        .expect("spawn writer");
    println!(
        r#"<eiout><eicommands><printonconsole><content format="text" execid="{execid}" time="{interval}ms">started</content></printonconsole></eicommands></eiout>"#
    );
}

fn child(args: &[String]) {
    let stream = PathBuf::from(&args[0]);
    let download = PathBuf::from(&args[1]);
    let chunks: usize = args[2].parse().expect("chunk count");
    let interval = Duration::from_millis(args[3].parse().expect("interval"));
    let mut log = OpenOptions::new().create(true).append(true).open(download.join("writer.log")).expect("log");
    let mut rng = rand::thread_rng();
    for i in 0..chunks {
        let len = rng.gen_range(1..2048);
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        log.write_all(&data).expect("log write");
        log.flush().expect("log flush");
        let tmp = stream.join(format!(".chunk-{i}.tmp"));
        fs::write(&tmp, &data).expect("chunk write");
        fs::rename(&tmp, stream.join(format!("{i:06}.out"))).expect("chunk rename");
        std::thread::sleep(interval);
    }
    fs::remove_file(stream.join("running")).expect("remove sentinel");
}
