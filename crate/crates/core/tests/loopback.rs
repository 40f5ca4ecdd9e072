use std::io::Read;
use std::net::TcpListener;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use bdptune::bench::{self, BenchReport, BenchRunConfig, BenchServer, PayloadPattern};
use bdptune::probe::{self, ProbeConfig};
use bdptune::Error;

// Throughput comparisons are only meaningful when benches do not overlap.
static BENCH: Mutex<()> = Mutex::new(());

fn bench_pair(cfg: impl FnOnce(u16) -> BenchRunConfig) -> (BenchReport, BenchReport) {
    let _guard = BENCH.lock().unwrap_or_else(|e| e.into_inner());
    let server = BenchServer::bind("127.0.0.1:0".parse().unwrap(), None).unwrap();
    let port = server.local_addr().unwrap().port();
    let srv = thread::spawn(move || server.serve_one(|_| {}).unwrap().unwrap());
    let client = bench::run_client(&cfg(port)).unwrap();
    (client, srv.join().unwrap())
}

#[test]
fn sample_count_and_averages() {
    let (client, server) =
        bench_pair(|port| BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(3)));
    for r in [&client, &server] {
        let n = r.samples.len();
        assert!((2..=4).contains(&n), "{n} samples");
        let ts: Vec<f64> = r.samples.iter().map(|s| s.t).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]), "{ts:?}");
        let s = &r.summary;
        let rel = (s.final_cum_avg_bps - s.mean_inst_bps).abs() / s.mean_inst_bps;
        assert!(
            rel <= 0.01,
            "cum {} vs mean {}",
            s.final_cum_avg_bps,
            s.mean_inst_bps
        );
    }
    assert_eq!(client.summary.total_bytes, server.summary.total_bytes);
}

#[test]
fn jsonl_round_trip() {
    let (client, _) =
        bench_pair(|port| BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(1)));
    let (samples, summary) = bench::parse_jsonl(&client.to_jsonl()).unwrap();
    assert_eq!(samples, client.samples);
    assert_eq!(
        summary.unwrap().stats.total_bytes,
        client.summary.total_bytes
    );
}

fn capture(seed: u64) -> Vec<u8> {
    let _guard = BENCH.lock().unwrap_or_else(|e| e.into_inner());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let reader = thread::spawn(move || {
        let (mut conn, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        conn.read_to_end(&mut buf).unwrap();
        buf
    });
    let mut cfg = BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(1));
    cfg.payload = PayloadPattern::Pseudorandom { seed };
    bench::run_client(&cfg).unwrap();
    reader.join().unwrap()
}

#[test]
fn seeded_payload_is_reproducible() {
    let a = capture(7);
    let b = capture(7);
    let c = capture(8);
    let n = a.len().min(b.len()).min(c.len()).min(1 << 22);
    assert!(n > 0);
    assert_eq!(a[..n], b[..n]);
    assert_ne!(a[..n], c[..n]);
}

#[test]
fn tiny_sndbuf_is_not_faster() {
    let (default, _) =
        bench_pair(|port| BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(1)));
    let (small, _) = bench_pair(|port| {
        let mut cfg = BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(1));
        cfg.sndbuf_bytes = Some(4096);
        cfg
    });
    let setting = small.buffer.unwrap();
    assert_eq!(setting.requested, 4096);
    assert!(setting.effective > 0);
    assert!(
        small.summary.mean_inst_bps <= default.summary.mean_inst_bps,
        "{} > {}",
        small.summary.mean_inst_bps,
        default.summary.mean_inst_bps
    );
}

#[test]
fn probe_counts_samples() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let acceptor = thread::spawn(move || {
        for conn in listener.incoming().take(4) {
            drop(conn);
        }
    });
    let cfg = ProbeConfig {
        samples: 4,
        timeout: Duration::from_secs(1),
        spacing: Duration::from_millis(10),
    };
    let r = probe::measure_rtt("127.0.0.1", port, &cfg).unwrap();
    acceptor.join().unwrap();
    assert_eq!(r.samples.len(), 4);
    assert_eq!(r.failures, 0);
    assert!(r.stddev_s >= 0.0);
}

#[test]
fn probe_closed_port_is_unreachable() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let cfg = ProbeConfig {
        samples: 2,
        timeout: Duration::from_millis(200),
        spacing: Duration::ZERO,
    };
    let err = probe::measure_rtt("127.0.0.1", port, &cfg).unwrap_err();
    assert!(
        matches!(err, Error::Unreachable { failures: 2, .. }),
        "{err:?}"
    );
}
