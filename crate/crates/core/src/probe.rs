//! RTT estimation by timing TCP handshakes.
//!
//! Each sample opens a connection, measures the time until `connect`
//! returns, and closes it straight away without sending any payload.
//! Attempts run one after another with a pause between them so the probe
//! does not queue behind itself.

use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub samples: usize,
    pub timeout: Duration,
    pub spacing: Duration,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            samples: 11,
            timeout: Duration::from_secs(1),
            spacing: Duration::from_millis(100),
        }
    }
}

/// Statistics over the successful handshakes of one probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttReport {
    pub target: String,
    pub samples: Vec<f64>,
    pub min_s: f64,
    pub median_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
    /// Population standard deviation.
    pub stddev_s: f64,
    pub failures: usize,
}

impl RttReport {
    /// Computes statistics over `samples`, which must be non-empty.
    pub fn from_samples(
        target: impl Into<String>,
        samples: Vec<f64>,
        failures: usize,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median_s = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        // Summing in sorted order keeps the result independent of sample order.
        let mean_s = sorted.iter().sum::<f64>() / n as f64;
        let var = sorted.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / n as f64;
        Ok(Self {
            target: target.into(),
            min_s: sorted[0],
            max_s: sorted[n - 1],
            median_s,
            mean_s,
            stddev_s: var.sqrt(),
            samples,
            failures,
        })
    }
}

fn resolve(host: &str, port: u16) -> Result<SocketAddr> {
    let mut addrs = (host, port).to_socket_addrs().map_err(|e| Error::Resolve {
        host: host.to_owned(),
        reason: e.to_string(),
    })?;
    addrs.next().ok_or_else(|| Error::Resolve {
        host: host.to_owned(),
        reason: "no addresses".into(),
    })
}

/// Times one handshake. The connection is dropped (closed) immediately.
pub fn handshake_rtt(addr: &SocketAddr, timeout: Duration) -> std::io::Result<Duration> {
    let start = Instant::now();
    let stream = TcpStream::connect_timeout(addr, timeout)?;
    let elapsed = start.elapsed();
    drop(stream);
    Ok(elapsed)
}

pub fn measure_rtt(host: &str, port: u16, config: &ProbeConfig) -> Result<RttReport> {
    if config.samples == 0 {
        return Err(Error::invalid("probe", "samples must be >= 1"));
    }
    if config.timeout.is_zero() {
        return Err(Error::invalid("probe", "timeout must be > 0"));
    }
    let addr = resolve(host, port)?;
    let target = format!("{host}:{port}");

    let mut samples = Vec::with_capacity(config.samples);
    let mut failures = 0;
    for i in 0..config.samples {
        if i > 0 && !config.spacing.is_zero() {
            thread::sleep(config.spacing);
        }
        match handshake_rtt(&addr, config.timeout) {
            Ok(rtt) => samples.push(rtt.as_secs_f64()),
            Err(_) => failures += 1,
        }
    }
    if samples.is_empty() {
        return Err(Error::Unreachable { target, failures });
    }
    RttReport::from_samples(target, samples, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn single_sample_statistics() {
        let r = RttReport::from_samples("x", vec![0.003], 0).unwrap();
        assert_eq!(r.min_s, 0.003);
        assert_eq!(r.median_s, 0.003);
        assert_eq!(r.mean_s, 0.003);
        assert_eq!(r.stddev_s, 0.0);
    }

    #[test]
    fn even_count_median_averages_middle() {
        let r = RttReport::from_samples("x", vec![4.0, 1.0, 3.0, 2.0], 1).unwrap();
        assert_eq!(r.median_s, 2.5);
        assert_eq!(r.mean_s, 2.5);
        assert_eq!(r.min_s, 1.0);
        assert_eq!(r.max_s, 4.0);
        assert!((r.stddev_s - 1.25f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.failures, 1);
    }

    #[test]
    fn empty_samples_rejected() {
        assert!(matches!(
            RttReport::from_samples("x", vec![], 3),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn closed_port_is_unreachable() {
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let cfg = ProbeConfig {
            samples: 3,
            timeout: Duration::from_millis(200),
            spacing: Duration::ZERO,
        };
        match measure_rtt("127.0.0.1", port, &cfg) {
            Err(Error::Unreachable { failures, .. }) => assert_eq!(failures, 3),
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn unresolvable_host_is_distinct() {
        let cfg = ProbeConfig {
            samples: 1,
            ..ProbeConfig::default()
        };
        assert!(matches!(
            measure_rtt("no-such-host.invalid", 80, &cfg),
            Err(Error::Resolve { .. })
        ));
    }

    #[test]
    fn zero_samples_rejected() {
        let cfg = ProbeConfig {
            samples: 0,
            ..ProbeConfig::default()
        };
        assert!(measure_rtt("127.0.0.1", 1, &cfg).is_err());
    }
}
