//! Two-second loopback benchmark: a discard server on one thread, a streaming
//! client on the main thread, per-interval samples printed as they arrive.

use std::thread;
use std::time::Duration;

use bdptune::bench::{run_client_with, BenchRunConfig, BenchServer, PayloadPattern};
use bdptune::units::display_rate;

fn main() -> bdptune::Result<()> {
    let server = BenchServer::bind("127.0.0.1:0".parse().unwrap(), None)?
        .with_interval(Duration::from_millis(500));
    let port = server.local_addr()?.port();
    let srv = thread::spawn(move || server.serve_one(|_| {}));

    let mut cfg = BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(2));
    cfg.interval = Duration::from_millis(500);
    cfg.payload = PayloadPattern::Pseudorandom { seed: 1 };
    let sent = run_client_with(&cfg, |s| {
        println!(
            "t={:.2}s  {}  (avg {})",
            s.t,
            display_rate(s.inst_bps),
            display_rate(s.cum_avg_bps)
        );
    })?;
    let received = srv.join().expect("server thread")?.expect("one connection");

    println!("sent     {} bytes", sent.summary.total_bytes);
    println!("received {} bytes", received.summary.total_bytes);
    println!("{}", sent.summary_json());
    Ok(())
}
