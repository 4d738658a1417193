//! Serves the annotation and job API over a data directory.
//!
//! ```text
//! cargo run -p phasefield-service --example serve -- ./data 127.0.0.1:8080
//! ```

use std::net::SocketAddr;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = args.next().unwrap_or_else(|| "data".into());
    let addr: SocketAddr = args
        .next()
        .unwrap_or_else(|| "127.0.0.1:8080".into())
        .parse()
        .expect("address like 127.0.0.1:8080");
    std::fs::create_dir_all(std::path::Path::new(&root).join("frames"))?;
    println!("serving {root} on http://{addr}");
    phasefield_service::serve_blocking(root, addr, phasefield_service::default_workers())
}
