use std::net::{IpAddr, Ipv4Addr, SocketAddr};

use clap::Parser;
use riskscale_service::{router, AppState};

/// Serve the riskscale HTTP API.
#[derive(Debug, Parser)]
#[command(name = "riskscale-serve", version)]
struct Args {
    /// Address to bind; loopback unless widened explicitly.
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let addr = SocketAddr::new(args.bind, args.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default())).await
}
