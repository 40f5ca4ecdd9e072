//! Measures handshake RTT to a host and derives the BDP for a given capacity.
//!
//! ```text
//! cargo run --example rtt_probe -- example.com 443 1G
//! ```
//!
//! With no arguments it probes a throwaway listener on loopback.

use std::net::TcpListener;
use std::time::Duration;

use bdptune::model::{compute_bdp, LinkSpec};
use bdptune::probe::{measure_rtt, ProbeConfig};
use bdptune::units::{display_bits, parse_rate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = ProbeConfig {
        samples: 5,
        spacing: Duration::from_millis(50),
        ..ProbeConfig::default()
    };

    let (host, port, _listener) = match args.first() {
        Some(h) => (h.clone(), args.get(1).map_or(Ok(443), |p| p.parse())?, None),
        None => {
            let l = TcpListener::bind("127.0.0.1:0")?;
            let port = l.local_addr()?.port();
            // the kernel completes handshakes from the backlog without accept()
            ("127.0.0.1".to_string(), port, Some(l))
        }
    };
    let capacity = parse_rate(args.get(2).map_or("1G", String::as_str))?;

    let report = measure_rtt(&host, port, &cfg)?;
    println!(
        "{}: min {:.3} ms, median {:.3} ms, max {:.3} ms, {} failures",
        report.target,
        report.min_s * 1e3,
        report.median_s * 1e3,
        report.max_s * 1e3,
        report.failures
    );
    let bdp = compute_bdp(&LinkSpec::new(capacity, report.median_s)?);
    println!("bdp at {capacity} bps: {}", display_bits(bdp.value()));
    Ok(())
}
