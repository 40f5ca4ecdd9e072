//! iperf-style single-stream throughput bench.
//!
//! The wire format is a raw TCP byte stream: the client writes for a fixed
//! duration and half-closes, the server reads and discards until EOF.
//! Both ends count bytes into an atomic counter from the transfer loop while
//! a separate sampler thread turns the counter into per-interval samples, so
//! reporting never stalls the data path.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use socket2::{Domain, Protocol, SockRef, Socket, Type};

use crate::error::{Error, Result};

pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(1);
const CHUNK_BYTES: usize = 128 * 1024;
const POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PayloadPattern {
    Zeros,
    Pseudorandom { seed: u64 },
}

/// Generates the bytes a client sends.
pub struct PayloadSource {
    rng: Option<ChaCha8Rng>,
}

impl PayloadSource {
    pub fn new(pattern: PayloadPattern) -> Self {
        let rng = match pattern {
            PayloadPattern::Zeros => None,
            PayloadPattern::Pseudorandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self { rng }
    }

    /// Overwrites `buf` with the next bytes of the stream.
    pub fn fill(&mut self, buf: &mut [u8]) {
        match &mut self.rng {
            Some(rng) => rng.fill_bytes(buf),
            None => buf.fill(0),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.rng.is_none()
    }
}

/// Throughput over one sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    /// Seconds since the stream started, at the end of this interval.
    pub t: f64,
    #[serde(rename = "bytes")]
    pub bytes_in_interval: u64,
    pub inst_bps: f64,
    pub cum_avg_bps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_bytes: u64,
    pub elapsed_s: f64,
    /// Time-weighted mean of the interval rates.
    pub mean_inst_bps: f64,
    pub min_inst_bps: f64,
    pub max_inst_bps: f64,
    pub final_cum_avg_bps: f64,
    pub samples: usize,
}

pub fn summarize(samples: &[BenchSample]) -> Result<Summary> {
    let last = samples.last().ok_or(Error::EmptySamples)?;
    let mut total_bytes: u64 = 0;
    let mut weighted = 0.0;
    let mut prev_t = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for s in samples {
        // also rejects NaN
        if s.t.partial_cmp(&prev_t) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid(
                "bench samples",
                format!("sample times must increase, got {} after {prev_t}", s.t),
            ));
        }
        total_bytes += s.bytes_in_interval;
        weighted += s.inst_bps * (s.t - prev_t);
        prev_t = s.t;
        min = min.min(s.inst_bps);
        max = max.max(s.inst_bps);
    }
    Ok(Summary {
        total_bytes,
        elapsed_s: last.t,
        mean_inst_bps: weighted / last.t,
        min_inst_bps: min,
        max_inst_bps: max,
        final_cum_avg_bps: last.cum_avg_bps,
        samples: samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sender,
    Receiver,
}

/// A socket buffer override and what the kernel actually granted. Linux
/// reports double the requested value and clamps at `rmem_max`/`wmem_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferSetting {
    pub requested: usize,
    pub effective: usize,
}

impl BufferSetting {
    pub fn clamped(&self) -> bool {
        self.effective < self.requested
    }
}

/// Outcome of one bench stream, as seen from one side.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub side: Side,
    pub peer: SocketAddr,
    pub samples: Vec<BenchSample>,
    pub summary: Summary,
    /// The stream ended early (peer reset, write failure, shutdown).
    pub truncated: bool,
    pub buffer: Option<BufferSetting>,
}

#[derive(Serialize, Deserialize)]
struct SummaryRecord {
    side: Side,
    truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    buffer: Option<BufferSetting>,
    #[serde(flatten)]
    stats: Summary,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: SummaryRecord,
}

impl BenchReport {
    /// The trailing `{"summary": …}` JSON Lines record.
    pub fn summary_json(&self) -> String {
        serde_json::to_string(&SummaryLine {
            summary: SummaryRecord {
                side: self.side,
                truncated: self.truncated,
                buffer: self.buffer,
                stats: self.summary,
            },
        })
        .expect("summary serializes")
    }

    /// One JSON object per sample followed by the summary object.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&sample_json(s));
            out.push('\n');
        }
        out.push_str(&self.summary_json());
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.samples)
    }
}

pub fn sample_json(sample: &BenchSample) -> String {
    serde_json::to_string(sample).expect("sample serializes")
}

pub const CSV_HEADER: &str = "t,bytes,inst_bps,cum_avg_bps";

pub fn sample_csv_row(s: &BenchSample) -> String {
    format!(
        "{},{},{},{}",
        s.t, s.bytes_in_interval, s.inst_bps, s.cum_avg_bps
    )
}

pub fn samples_to_csv(samples: &[BenchSample]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&sample_csv_row(s));
        out.push('\n');
    }
    out
}

/// Summary fields recovered from a JSON Lines trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub side: Side,
    pub truncated: bool,
    pub buffer: Option<BufferSetting>,
    pub stats: Summary,
}

/// Reads a JSON Lines trace written by [`BenchReport::to_jsonl`]. Blank lines
/// are skipped; the summary record is optional.
pub fn parse_jsonl(text: &str) -> Result<(Vec<BenchSample>, Option<TraceSummary>)> {
    let mut samples = Vec::new();
    let mut summary = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| Error::Parse {
            input: line.to_owned(),
            token: format!("line {}", i + 1),
            reason: e.to_string(),
        };
        if line.contains("\"summary\"") {
            let parsed: SummaryLine = serde_json::from_str(line).map_err(bad)?;
            let r = parsed.summary;
            summary = Some(TraceSummary {
                side: r.side,
                truncated: r.truncated,
                buffer: r.buffer,
                stats: r.stats,
            });
        } else {
            samples.push(serde_json::from_str(line).map_err(bad)?);
        }
    }
    Ok((samples, summary))
}

#[derive(Default)]
struct Accumulator {
    samples: Vec<BenchSample>,
    last_t: f64,
    last_total: u64,
}

impl Accumulator {
    fn push(&mut self, t: f64, total: u64) -> &BenchSample {
        let bytes = total - self.last_total;
        self.samples.push(BenchSample {
            t,
            bytes_in_interval: bytes,
            inst_bps: bytes as f64 * 8.0 / (t - self.last_t),
            cum_avg_bps: total as f64 * 8.0 / t,
        });
        self.last_t = t;
        self.last_total = total;
        self.samples.last().expect("just pushed")
    }
}

/// Turns the shared byte counter into samples until the transfer reports
/// its end time.
fn sample_loop(
    counter: &AtomicU64,
    start: Instant,
    interval: Duration,
    stop: mpsc::Receiver<Instant>,
    on_sample: &mut (dyn FnMut(&BenchSample) + Send),
) -> Vec<BenchSample> {
    let mut acc = Accumulator::default();
    let mut tick = 1u32;
    loop {
        let deadline = start + interval * tick;
        let wait = deadline.saturating_duration_since(Instant::now());
        match stop.recv_timeout(wait) {
            Err(RecvTimeoutError::Timeout) => {
                let t = start.elapsed().as_secs_f64();
                on_sample(acc.push(t, counter.load(Ordering::Acquire)));
                tick += 1;
            }
            Ok(end) => {
                let total = counter.load(Ordering::Acquire);
                let t = end.saturating_duration_since(start).as_secs_f64();
                if total > acc.last_total || (acc.samples.is_empty() && t > 0.0) {
                    let t = t.max(acc.last_t + f64::EPSILON);
                    on_sample(acc.push(t, total));
                }
                return acc.samples;
            }
            Err(RecvTimeoutError::Disconnected) => return acc.samples,
        }
    }
}

/// Runs `transfer` on the calling thread with a sampler alongside it.
/// `transfer` returns `true` when the stream was cut short.
fn sampled<F>(
    interval: Duration,
    on_sample: &mut (dyn FnMut(&BenchSample) + Send),
    transfer: F,
) -> (Vec<BenchSample>, bool)
where
    F: FnOnce(&AtomicU64) -> bool,
{
    let counter = AtomicU64::new(0);
    let start = Instant::now();
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        let sampler = scope.spawn(|| sample_loop(&counter, start, interval, rx, on_sample));
        let truncated = transfer(&counter);
        let _ = tx.send(Instant::now());
        let samples = sampler.join().expect("sampler thread panicked");
        (samples, truncated)
    })
}

fn finish(
    side: Side,
    peer: SocketAddr,
    samples: Vec<BenchSample>,
    truncated: bool,
    buffer: Option<BufferSetting>,
) -> Result<BenchReport> {
    let summary = summarize(&samples)?;
    Ok(BenchReport {
        side,
        peer,
        samples,
        summary,
        truncated,
        buffer,
    })
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
    )
}

/// Stops a running [`BenchServer`] from another thread or a signal handler.
#[derive(Debug, Clone, Default)]
pub struct ShutdownHandle(Arc<AtomicBool>);

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.0.store(true, Ordering::Release);
    }

    pub fn is_shutdown(&self) -> bool {
        self.0.load(Ordering::Acquire)
    }
}

/// Discard server. Serves one connection at a time.
pub struct BenchServer {
    listener: TcpListener,
    rcvbuf: Option<usize>,
    interval: Duration,
    shutdown: ShutdownHandle,
}

impl BenchServer {
    /// Binds `addr`. A receive buffer override is applied to the listening
    /// socket so accepted connections inherit it before any data flows.
    pub fn bind(addr: SocketAddr, rcvbuf: Option<usize>) -> Result<Self> {
        let context = || format!("bind {addr}");
        let socket = Socket::new(Domain::for_address(addr), Type::STREAM, Some(Protocol::TCP))
            .map_err(|e| Error::io(context(), e))?;
        socket
            .set_reuse_address(true)
            .map_err(|e| Error::io(context(), e))?;
        if let Some(bytes) = rcvbuf {
            if bytes == 0 {
                return Err(Error::invalid("bench server", "rcvbuf must be > 0"));
            }
            socket
                .set_recv_buffer_size(bytes)
                .map_err(|e| Error::io("set SO_RCVBUF", e))?;
        }
        socket
            .bind(&addr.into())
            .map_err(|e| Error::io(context(), e))?;
        socket.listen(16).map_err(|e| Error::io(context(), e))?;
        let listener: TcpListener = socket.into();
        listener
            .set_nonblocking(true)
            .map_err(|e| Error::io(context(), e))?;
        Ok(Self {
            listener,
            rcvbuf,
            interval: DEFAULT_INTERVAL,
            shutdown: ShutdownHandle::default(),
        })
    }

    pub fn with_interval(mut self, interval: Duration) -> Self {
        self.interval = interval;
        self
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener
            .local_addr()
            .map_err(|e| Error::io("local address", e))
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.shutdown.clone()
    }

    /// Waits for a client and drains its stream. Returns `None` if shut down
    /// before a client connected.
    pub fn serve_one(
        &self,
        mut on_sample: impl FnMut(&BenchSample) + Send,
    ) -> Result<Option<BenchReport>> {
        let (mut stream, peer) = loop {
            if self.shutdown.is_shutdown() {
                return Ok(None);
            }
            match self.listener.accept() {
                Ok(conn) => break conn,
                Err(e) if is_timeout(&e) || e.kind() == io::ErrorKind::Interrupted => {
                    thread::sleep(POLL)
                }
                Err(e) => return Err(Error::io("accept", e)),
            }
        };
        stream
            .set_nonblocking(false)
            .and_then(|_| stream.set_read_timeout(Some(POLL * 4)))
            .map_err(|e| Error::io(format!("configure stream from {peer}"), e))?;
        let buffer = match self.rcvbuf {
            Some(requested) => Some(BufferSetting {
                requested,
                effective: SockRef::from(&stream)
                    .recv_buffer_size()
                    .map_err(|e| Error::io("read SO_RCVBUF", e))?,
            }),
            None => None,
        };

        let shutdown = &self.shutdown;
        let (samples, truncated) = sampled(self.interval, &mut on_sample, |counter| {
            let mut buf = vec![0u8; 2 * CHUNK_BYTES];
            loop {
                match stream.read(&mut buf) {
                    Ok(0) => return false,
                    Ok(n) => {
                        counter.fetch_add(n as u64, Ordering::Release);
                    }
                    Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                    Err(e) if is_timeout(&e) => {
                        if shutdown.is_shutdown() {
                            return true;
                        }
                    }
                    Err(_) => return true,
                }
            }
        });
        finish(Side::Receiver, peer, samples, truncated, buffer).map(Some)
    }
}

/// Client-side run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRunConfig {
    pub host: String,
    pub port: u16,
    pub duration: Duration,
    pub sndbuf_bytes: Option<usize>,
    pub rcvbuf_bytes: Option<usize>,
    pub payload: PayloadPattern,
    pub interval: Duration,
    pub connect_timeout: Duration,
}

impl BenchRunConfig {
    pub fn new(host: impl Into<String>, port: u16, duration: Duration) -> Self {
        Self {
            host: host.into(),
            port,
            duration,
            sndbuf_bytes: None,
            rcvbuf_bytes: None,
            payload: PayloadPattern::Zeros,
            interval: DEFAULT_INTERVAL,
            connect_timeout: Duration::from_secs(5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration < Duration::from_secs(1) {
            return Err(Error::invalid("bench run", "duration must be at least 1 s"));
        }
        if self.interval.is_zero() {
            return Err(Error::invalid("bench run", "interval must be > 0"));
        }
        if self.sndbuf_bytes == Some(0) || self.rcvbuf_bytes == Some(0) {
            return Err(Error::invalid("bench run", "buffer overrides must be > 0"));
        }
        Ok(())
    }
}

fn connect(config: &BenchRunConfig) -> Result<(TcpStream, SocketAddr, Option<BufferSetting>)> {
    let addr = (config.host.as_str(), config.port)
        .to_socket_addrs()
        .map_err(|e| Error::Resolve {
            host: config.host.clone(),
            reason: e.to_string(),
        })?
        .next()
        .ok_or_else(|| Error::Resolve {
            host: config.host.clone(),
            reason: "no addresses".into(),
        })?;
    let socket = Socket::new(Domain::for_address(addr), Type::STREAM, Some(Protocol::TCP))
        .map_err(|e| Error::io("create socket", e))?;
    if let Some(bytes) = config.sndbuf_bytes {
        socket
            .set_send_buffer_size(bytes)
            .map_err(|e| Error::io("set SO_SNDBUF", e))?;
    }
    if let Some(bytes) = config.rcvbuf_bytes {
        socket
            .set_recv_buffer_size(bytes)
            .map_err(|e| Error::io("set SO_RCVBUF", e))?;
    }
    socket
        .connect_timeout(&addr.into(), config.connect_timeout)
        .map_err(|e| Error::io(format!("connect to {addr}"), e))?;
    let buffer = match config.sndbuf_bytes {
        Some(requested) => Some(BufferSetting {
            requested,
            effective: socket
                .send_buffer_size()
                .map_err(|e| Error::io("read SO_SNDBUF", e))?,
        }),
        None => None,
    };
    Ok((socket.into(), addr, buffer))
}

pub fn run_client(config: &BenchRunConfig) -> Result<BenchReport> {
    run_client_with(config, |_| {})
}

/// Streams to a bench server for `config.duration`, calling `on_sample` from
/// the sampler thread as each interval completes.
pub fn run_client_with(
    config: &BenchRunConfig,
    mut on_sample: impl FnMut(&BenchSample) + Send,
) -> Result<BenchReport> {
    config.validate()?;
    let (mut stream, peer, buffer) = connect(config)?;
    stream
        .set_write_timeout(Some(POLL * 4))
        .map_err(|e| Error::io("configure stream", e))?;

    let duration = config.duration;
    let mut source = PayloadSource::new(config.payload);
    let (samples, truncated) = sampled(config.interval, &mut on_sample, |counter| {
        let mut buf = vec![0u8; CHUNK_BYTES];
        source.fill(&mut buf);
        let refill = !source.is_constant();
        let mut offset = 0;
        let start = Instant::now();
        while start.elapsed() < duration {
            if offset == buf.len() {
                offset = 0;
                if refill {
                    source.fill(&mut buf);
                }
            }
            match stream.write(&buf[offset..]) {
                Ok(0) => return true,
                Ok(n) => {
                    offset += n;
                    counter.fetch_add(n as u64, Ordering::Release);
                }
                Err(e) if is_timeout(&e) || e.kind() == io::ErrorKind::Interrupted => {}
                Err(_) => return true,
            }
        }
        false
    });

    // Half-close and wait for the server to finish draining.
    if stream.shutdown(Shutdown::Write).is_ok() {
        let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
        let mut sink = [0u8; 1024];
        while let Ok(n) = stream.read(&mut sink) {
            if n == 0 {
                break;
            }
        }
    }
    finish(Side::Sender, peer, samples, truncated, buffer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, bytes: u64, total: u64, prev_t: f64) -> BenchSample {
        BenchSample {
            t,
            bytes_in_interval: bytes,
            inst_bps: bytes as f64 * 8.0 / (t - prev_t),
            cum_avg_bps: total as f64 * 8.0 / t,
        }
    }

    #[test]
    fn summarize_single_sample() {
        let s = sample(1.0, 1_000_000, 1_000_000, 0.0);
        let sum = summarize(&[s]).unwrap();
        assert_eq!(sum.mean_inst_bps, 8e6);
        assert_eq!(sum.min_inst_bps, 8e6);
        assert_eq!(sum.max_inst_bps, 8e6);
        assert_eq!(sum.final_cum_avg_bps, 8e6);
        assert_eq!(sum.total_bytes, 1_000_000);
    }

    #[test]
    fn summarize_two_equal_intervals() {
        let a = sample(1.0, 12_500_000, 12_500_000, 0.0);
        let b = sample(2.0, 37_500_000, 50_000_000, 1.0);
        assert_eq!(a.inst_bps, 100e6);
        assert_eq!(b.inst_bps, 300e6);
        let sum = summarize(&[a, b]).unwrap();
        assert_eq!(sum.mean_inst_bps, 200e6);
        assert_eq!(sum.min_inst_bps, 100e6);
        assert_eq!(sum.max_inst_bps, 300e6);
    }

    #[test]
    fn summarize_weights_partial_interval() {
        let a = sample(1.0, 1000, 1000, 0.0);
        let b = sample(1.5, 1000, 2000, 1.0);
        let sum = summarize(&[a, b]).unwrap();
        let total_bits = 2000.0 * 8.0;
        assert!((sum.mean_inst_bps * sum.elapsed_s - total_bits).abs() < 1e-9);
    }

    #[test]
    fn summarize_rejects_empty_and_unordered() {
        assert!(matches!(summarize(&[]), Err(Error::EmptySamples)));
        let a = sample(2.0, 1, 1, 0.0);
        let b = sample(1.0, 1, 2, 0.0);
        assert!(summarize(&[a, b]).is_err());
    }

    #[test]
    fn seeded_payload_is_reproducible() {
        let mut a = PayloadSource::new(PayloadPattern::Pseudorandom { seed: 7 });
        let mut b = PayloadSource::new(PayloadPattern::Pseudorandom { seed: 7 });
        let mut c = PayloadSource::new(PayloadPattern::Pseudorandom { seed: 8 });
        let (mut x, mut y, mut z) = (vec![0u8; 4096], vec![0u8; 4096], vec![0u8; 4096]);
        for _ in 0..3 {
            a.fill(&mut x);
            b.fill(&mut y);
            c.fill(&mut z);
            assert_eq!(x, y);
            assert_ne!(x, z);
        }
        let mut zeros = PayloadSource::new(PayloadPattern::Zeros);
        zeros.fill(&mut x);
        assert!(x.iter().all(|&b| b == 0));
    }

    #[test]
    fn jsonl_round_trip() {
        let samples = vec![sample(1.0, 10, 10, 0.0), sample(2.0, 30, 40, 1.0)];
        let report = BenchReport {
            side: Side::Receiver,
            peer: "127.0.0.1:1".parse().unwrap(),
            summary: summarize(&samples).unwrap(),
            samples,
            truncated: false,
            buffer: Some(BufferSetting {
                requested: 4096,
                effective: 8192,
            }),
        };
        let text = report.to_jsonl();
        let first = text.lines().next().unwrap();
        let keys: serde_json::Value = serde_json::from_str(first).unwrap();
        let mut names: Vec<_> = keys.as_object().unwrap().keys().cloned().collect();
        names.sort();
        assert_eq!(names, ["bytes", "cum_avg_bps", "inst_bps", "t"]);
        assert!(text.lines().last().unwrap().starts_with("{\"summary\":"));

        let (back, summary) = parse_jsonl(&text).unwrap();
        assert_eq!(back, report.samples);
        let summary = summary.unwrap();
        assert_eq!(summary.stats, report.summary);
        assert_eq!(summary.side, Side::Receiver);
        assert_eq!(summary.buffer, report.buffer);

        assert_eq!(
            report.to_csv(),
            "t,bytes,inst_bps,cum_avg_bps\n1,10,80,80\n2,30,240,160\n"
        );
    }

    #[test]
    fn run_config_validation() {
        let mut cfg = BenchRunConfig::new("127.0.0.1", 1, Duration::from_millis(500));
        assert!(cfg.validate().is_err());
        cfg.duration = Duration::from_secs(1);
        assert!(cfg.validate().is_ok());
        cfg.sndbuf_bytes = Some(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn connection_refused_is_an_error() {
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let cfg = BenchRunConfig::new("127.0.0.1", port, Duration::from_secs(1));
        assert!(matches!(run_client(&cfg), Err(Error::Io { .. })));
    }

    #[test]
    fn server_shutdown_without_client() {
        let server = BenchServer::bind("127.0.0.1:0".parse().unwrap(), None).unwrap();
        let handle = server.shutdown_handle();
        let t = thread::spawn(move || {
            thread::sleep(Duration::from_millis(100));
            handle.shutdown();
        });
        let mut seen = 0;
        assert!(server.serve_one(|_| seen += 1).unwrap().is_none());
        assert_eq!(seen, 0);
        t.join().unwrap();
    }
}
