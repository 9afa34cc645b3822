//! Serves a saved bundle over HTTP, sends one request to it and keeps
//! serving until interrupted.
//!
//! cargo run --release --example serve_bundle -- <bundle dir> [port]

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use mex::workbench::{load_bundle_for, router, serve_on, DEFAULT_MAX_BODY};
use mex::SchemaDefinition;
use tokio::net::TcpListener;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let Some(dir) = args.get(1) else {
        eprintln!("usage: serve_bundle <bundle dir> [port]");
        std::process::exit(1);
    };
    let port: u16 = args.get(2).and_then(|p| p.parse().ok()).unwrap_or(8080);
    let schema = SchemaDefinition::shipped();
    let bundle = load_bundle_for(dir, &schema)?;

    let listener = TcpListener::bind(("127.0.0.1", port)).await?;
    let addr = listener.local_addr()?;
    let app = router(Arc::new(bundle), Arc::new(schema), DEFAULT_MAX_BODY);
    let server = tokio::spawn(serve_on(listener, app));
    println!("listening on http://{addr}");

    let response = tokio::task::spawn_blocking(move || -> std::io::Result<String> {
        let body = "Sonographie zeigt Hydronephrose links.";
        let mut stream = TcpStream::connect(addr)?;
        write!(
            stream,
            "POST /annotate HTTP/1.1\r\nHost: {addr}\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )?;
        let mut response = String::new();
        stream.read_to_string(&mut response)?;
        Ok(response)
    })
    .await??;
    println!("{response}");
    println!("try: curl -s -X POST --data-binary 'Prograf 5 mg' http://{addr}/annotate");

    server.await??;
    Ok(())
}
