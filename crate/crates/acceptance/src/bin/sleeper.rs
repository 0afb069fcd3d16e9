//! `sleeper SECONDS`: sleeps, then prints `awake`.

fn main() {
    let secs: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    std::thread::sleep(std::time::Duration::from_secs_f64(secs));
    println!("awake");
}
