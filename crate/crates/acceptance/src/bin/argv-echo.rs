//! Prints its argv and parent pid as JSON: `{"argv":[..],"ppid":N}`.

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let report = serde_json::json!({ "argv": argv, "ppid": std::os::unix::process::parent_id() });
    println!("{report}");
}
