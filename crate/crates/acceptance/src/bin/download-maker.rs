//! `download-maker DOWNLOAD_DIR FILE...`: copies each input file into the
//! download directory under its file name.

use std::path::Path;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().expect("download dir");
    for file in args {
        let name = Path::new(&file).file_name().expect("file name");
        std::fs::copy(&file, Path::new(&dir).join(name)).expect("copy");
        println!("offered {}", name.to_string_lossy());
    }
}
