//! The `bdptune` command line.
//!
//! Exit status is 0 on success, 1 on a domain error (unreachable host,
//! unreadable tunables, malformed input files) and 2 on a usage error.
//! Data goes to the output stream, diagnostics to the error stream.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bench::{self, BenchReport, BenchRunConfig, BenchSample, BenchServer, PayloadPattern};
use crate::error::Error;
use crate::model::{
    self, compute_bdp, LinkSpec, NicConfig, Preset, Recommendation, TcpBufferConfig,
};
use crate::probe::{self, ProbeConfig};
use crate::simulator::{self, ModelParams, ThroughputPoint};
use crate::sysctl;
use crate::units::{self, display_bits, display_rate};

pub const SYSCTL_ROOT_ENV: &str = "BDPTUNE_SYSCTL_ROOT";

const UNITS_HELP: &str = "\
Units: rates and bit counts take decimal K/M/G (e.g. 10G = 1e10 bps); byte
sizes take decimal K/M/G or binary Ki/Mi/Gi (256M = 256,000,000 B,
4Mi = 4,194,304 B); times take s, ms, us or ns (a bare number is seconds).";

#[derive(Debug, Parser)]
#[command(
    name = "bdptune",
    version,
    about = "Size TCP buffers, MTU and txqueuelen from the bandwidth-delay product",
    after_help = UNITS_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure RTT by timing TCP handshakes
    Probe(ProbeArgs),
    /// Recommend tunable values for a link
    Advise(AdviseArgs),
    /// Predict steady-state throughput for one configuration
    Simulate(SimulateArgs),
    /// Sweep buffer size, MTU or queue length through the model
    Sweep(SweepArgs),
    /// Run the bench discard server
    BenchServe(ServeArgs),
    /// Stream to a bench server and record throughput
    BenchRun(RunArgs),
    /// Summarize a bench JSON Lines trace
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

fn rate(s: &str) -> Result<f64, String> {
    units::parse_rate(s).map_err(|e| e.to_string())
}

fn seconds(s: &str) -> Result<f64, String> {
    units::parse_duration_s(s).map_err(|e| e.to_string())
}

fn duration(s: &str) -> Result<Duration, String> {
    let secs = seconds(s)?;
    Duration::try_from_secs_f64(secs).map_err(|e| e.to_string())
}

fn byte_size(s: &str) -> Result<u64, String> {
    units::parse_bytes(s).map_err(|e| e.to_string())
}

fn preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct LinkArgs {
    /// Scenario preset: home-lan, home-dsl, dc-1g or dc-10g
    #[arg(long, value_parser = preset)]
    pub preset: Option<Preset>,
    /// Link capacity in bits per second (overrides the preset)
    #[arg(long, value_parser = rate)]
    pub capacity: Option<f64>,
    /// Base round-trip time (overrides the preset; required for home-dsl)
    #[arg(long, value_parser = seconds)]
    pub rtt: Option<f64>,
    /// Background path loss rate
    #[arg(long, value_parser = fraction, default_value = "0")]
    pub loss: f64,
}

impl LinkArgs {
    fn link(&self) -> Result<LinkSpec, CliError> {
        let (capacity, rtt) = match self.preset {
            Some(p) => {
                let rtt = self.rtt.or(p.base_rtt_s()).ok_or_else(|| {
                    CliError::Usage(format!(
                        "preset {p} has no known RTT; pass --rtt (e.g. --rtt 20ms)"
                    ))
                })?;
                (self.capacity.unwrap_or(p.capacity_bps()), rtt)
            }
            None => match (self.capacity, self.rtt) {
                (Some(c), Some(r)) => (c, r),
                _ => {
                    return Err(CliError::Usage(
                        "give --preset, or both --capacity and --rtt".into(),
                    ))
                }
            },
        };
        LinkSpec::with_loss(capacity, rtt, self.loss).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Overflow loss coefficient
    #[arg(long, value_parser = fraction)]
    pub p0: Option<f64>,
    /// Background loss probability
    #[arg(long, value_parser = fraction)]
    pub background_loss: Option<f64>,
    /// Share of the socket buffer usable as window
    #[arg(long, value_parser = fraction)]
    pub window_fraction: Option<f64>,
    /// MTU recommended for fast, clean links
    #[arg(long)]
    pub jumbo_mtu: Option<u32>,
    /// Highest loss rate at which jumbo frames are recommended
    #[arg(long, value_parser = fraction)]
    pub loss_threshold: Option<f64>,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        let mut p = ModelParams::default();
        if let Some(v) = self.p0 {
            p.overflow_loss_coeff = v;
        }
        if let Some(v) = self.background_loss {
            p.background_loss = v;
        }
        if let Some(v) = self.window_fraction {
            p.window_fraction = v;
        }
        if let Some(v) = self.jumbo_mtu {
            p.jumbo_mtu_bytes = v;
        }
        if let Some(v) = self.loss_threshold {
            p.loss_threshold = v;
        }
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    pub host: String,
    #[arg(long, short)]
    pub port: u16,
    #[arg(long, default_value_t = 11)]
    pub samples: usize,
    #[arg(long, value_parser = duration, default_value = "1s")]
    pub timeout: Duration,
    #[arg(long, value_parser = duration, default_value = "100ms")]
    pub spacing: Duration,
    /// Also print the BDP for this capacity using the median RTT
    #[arg(long, value_parser = rate)]
    pub capacity: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct AdviseArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Root of a /proc/sys-style tree; Linux defaults are assumed when unset
    #[arg(long, env = SYSCTL_ROOT_ENV)]
    pub sysctl_root: Option<PathBuf>,
    /// Current interface MTU
    #[arg(long, default_value_t = model::DEFAULT_MTU)]
    pub mtu: u32,
    /// Current interface txqueuelen
    #[arg(long, default_value_t = model::DEFAULT_TXQUEUELEN)]
    pub queue: u32,
    /// Buffer ceiling as a multiple of the BDP
    #[arg(long, default_value_t = model::DEFAULT_HEADROOM)]
    pub headroom: f64,
    /// Interface name used in the emitted `ip link` commands
    #[arg(long, default_value = "eth0")]
    pub iface: String,
    /// Also print a sysctl.conf snippet and ip link commands
    #[arg(long)]
    pub emit_conf: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Socket buffer ceiling in bytes, applied to all four maxima
    #[arg(long, value_parser = byte_size)]
    pub buffer: Option<u64>,
    #[arg(long, default_value_t = model::DEFAULT_MTU)]
    pub mtu: u32,
    #[arg(long, default_value_t = model::DEFAULT_TXQUEUELEN)]
    pub queue: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Buffer,
    Mtu,
    Queue,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(value_enum)]
    pub kind: SweepKind,
    #[command(flatten)]
    pub link: LinkArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated values to sweep (bytes for buffer/mtu, packets for queue)
    #[arg(long)]
    pub values: Option<String>,
    /// Fixed buffer ceiling for mtu and queue sweeps
    #[arg(long, value_parser = byte_size)]
    pub buffer: Option<u64>,
    /// Fixed MTU for buffer and queue sweeps
    #[arg(long, default_value_t = model::DEFAULT_MTU)]
    pub mtu: u32,
    /// Fixed txqueuelen for buffer and mtu sweeps
    #[arg(long, default_value_t = model::DEFAULT_TXQUEUELEN)]
    pub queue: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "0.0.0.0")]
    pub bind: IpAddr,
    #[arg(long, short, default_value_t = 5201)]
    pub port: u16,
    /// SO_RCVBUF override in bytes
    #[arg(long, value_parser = byte_size)]
    pub rcvbuf: Option<u64>,
    #[arg(long, value_parser = duration, default_value = "1s")]
    pub interval: Duration,
    /// Exit after the first connection
    #[arg(long)]
    pub once: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    Zeros,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub host: String,
    #[arg(long, short, default_value_t = 5201)]
    pub port: u16,
    #[arg(long, value_parser = duration, default_value = "10s")]
    pub duration: Duration,
    /// SO_SNDBUF override in bytes
    #[arg(long, value_parser = byte_size)]
    pub sndbuf: Option<u64>,
    /// SO_RCVBUF override in bytes
    #[arg(long, value_parser = byte_size)]
    pub rcvbuf: Option<u64>,
    #[arg(long, value_enum, default_value_t = Pattern::Zeros)]
    pub pattern: Pattern,
    /// Seed for the random pattern
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = duration, default_value = "1s")]
    pub interval: Duration,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// JSON Lines trace written by bench-serve or bench-run
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "error: {e}"),
            CliError::Io(e) => write!(f, "error: {e}"),
        }
    }
}

type Out<'a> = &'a mut (dyn Write + Send);

/// Parses `args` (including the program name) and runs the command, returning
/// the process exit status.
pub fn run<I, T>(args: I, out: Out<'_>, err: Out<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    match command {
        Command::Probe(a) => cmd_probe(a, out),
        Command::Advise(a) => cmd_advise(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::BenchServe(a) => cmd_serve(a, out, err),
        Command::BenchRun(a) => cmd_run(a, out, err),
        Command::Report(a) => cmd_report(a, out),
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

fn cmd_probe(a: ProbeArgs, out: Out<'_>) -> Result<(), CliError> {
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be >= 1".into()));
    }
    if a.timeout.is_zero() {
        return Err(CliError::Usage("--timeout must be > 0".into()));
    }
    let cfg = ProbeConfig {
        samples: a.samples,
        timeout: a.timeout,
        spacing: a.spacing,
    };
    let report = probe::measure_rtt(&a.host, a.port, &cfg)?;
    let bdp = match a.capacity {
        Some(c) => Some(compute_bdp(
            &LinkSpec::new(c, report.median_s).map_err(|e| CliError::Usage(e.to_string()))?,
        )),
        None => None,
    };
    let text = match a.format {
        Format::Json => {
            let mut v = serde_json::to_value(&report).expect("report serializes");
            if let Some(b) = bdp {
                v["bdp_bits"] = json!(b.value());
            }
            to_json(&v) + "\n"
        }
        Format::Csv => {
            let mut s = String::from("sample,rtt_s\n");
            for (i, r) in report.samples.iter().enumerate() {
                let _ = writeln!(s, "{i},{r}");
            }
            s
        }
        Format::Text => {
            let ms = |s: f64| s * 1e3;
            let mut s = format!(
                "{}: {} ok, {} failed\nrtt min/median/mean/max/stddev = {:.3}/{:.3}/{:.3}/{:.3}/{:.3} ms\n",
                report.target,
                report.samples.len(),
                report.failures,
                ms(report.min_s),
                ms(report.median_s),
                ms(report.mean_s),
                ms(report.max_s),
                ms(report.stddev_s),
            );
            let _ = writeln!(s, "median_s = {}", report.median_s);
            if let Some(b) = bdp {
                let _ = writeln!(s, "bdp_bits = {} ({b}) using median RTT", b.value());
            }
            s
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn recommendations_table(recs: &[Recommendation]) -> String {
    let kw = recs
        .iter()
        .map(|r| r.key.name().len())
        .max()
        .unwrap_or(3)
        .max(3);
    let cw = recs
        .iter()
        .map(|r| r.current.len())
        .max()
        .unwrap_or(7)
        .max(7);
    let rw = recs
        .iter()
        .map(|r| r.recommended.len())
        .max()
        .unwrap_or(11)
        .max(11);
    let mut s = format!(
        "{:kw$}  {:cw$}  {:rw$}  {:7}  rationale\n",
        "key", "current", "recommended", "changed"
    );
    for r in recs {
        let _ = writeln!(
            s,
            "{:kw$}  {:cw$}  {:rw$}  {:7}  {}",
            r.key.name(),
            r.current,
            r.recommended,
            if r.changed { "yes" } else { "no" },
            r.rationale
        );
    }
    s
}

fn cmd_advise(a: AdviseArgs, out: Out<'_>) -> Result<(), CliError> {
    let link = a.link.link()?;
    let params = a.model.params()?;
    if !(a.headroom >= 1.0 && a.headroom.is_finite()) {
        return Err(CliError::Usage(format!(
            "--headroom must be >= 1, got {}",
            a.headroom
        )));
    }
    let nic = NicConfig::new(a.mtu, a.queue).map_err(|e| CliError::Usage(e.to_string()))?;
    let (tcp, source) = match &a.sysctl_root {
        Some(root) => (
            sysctl::read_snapshot(root)?.config,
            root.display().to_string(),
        ),
        None => (
            TcpBufferConfig::linux_defaults(),
            "linux defaults".to_owned(),
        ),
    };
    let bdp = compute_bdp(&link);
    let recs = model::advise_with_headroom(&link, &tcp, &nic, &params, a.headroom);
    let (_, next_nic) = model::apply(&recs, &tcp, &nic)?;
    let conf = sysctl::emit_sysctl_conf(&recs);
    let commands = sysctl::emit_link_commands(&a.iface, &next_nic)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let text = match a.format {
        Format::Json => {
            let mut v = json!({
                "link": link,
                "bdp_bits": bdp.value(),
                "source": source,
                "recommendations": recs,
            });
            if a.emit_conf {
                v["sysctl_conf"] = json!(conf);
                v["link_commands"] = json!(commands);
            }
            to_json(&v) + "\n"
        }
        Format::Csv => {
            let mut s = String::from("key,current,recommended,changed\n");
            for r in &recs {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    r.key.name(),
                    r.current,
                    r.recommended,
                    r.changed
                );
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "link: {} at {} s RTT, loss {}; bdp_bits = {} ({bdp}); settings from {source}\n\n",
                display_rate(link.capacity_bps()),
                link.base_rtt_s(),
                link.loss_rate(),
                bdp.value(),
            );
            s.push_str(&recommendations_table(&recs));
            if a.emit_conf {
                s.push_str("\n# sysctl.conf\n");
                s.push_str(&conf);
                s.push_str("\n# interface\n");
                for c in &commands {
                    s.push_str(c);
                    s.push('\n');
                }
            }
            s
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn buffer_config(buffer: Option<u64>) -> Result<TcpBufferConfig, CliError> {
    match buffer {
        Some(0) => Err(CliError::Usage("--buffer must be > 0".into())),
        Some(b) => Ok(TcpBufferConfig::linux_defaults().with_max_buffers(b)),
        None => Ok(TcpBufferConfig::linux_defaults()),
    }
}

fn cmd_simulate(a: SimulateArgs, out: Out<'_>) -> Result<(), CliError> {
    let link = a.link.link()?;
    let params = a.model.params()?;
    let tcp = buffer_config(a.buffer)?;
    let nic = NicConfig::new(a.mtu, a.queue).map_err(|e| CliError::Usage(e.to_string()))?;
    let pred = simulator::simulate_throughput(&link, &tcp, &nic, &params)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let text = match a.format {
        Format::Json => to_json(&pred) + "\n",
        Format::Csv => simulator::points_to_csv(&[pred.at(tcp.window_bytes())]),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "throughput_bps = {} ({}), limited by {}",
                pred.throughput_bps,
                display_rate(pred.throughput_bps),
                pred.limiting_factor
            );
            let _ = writeln!(
                s,
                "window_bits = {} ({})",
                pred.window_bits,
                display_bits(pred.window_bits)
            );
            let _ = writeln!(
                s,
                "bdp_bits = {} ({})",
                pred.bdp_bits,
                display_bits(pred.bdp_bits)
            );
            let _ = writeln!(s, "effective_rtt_s = {}", pred.effective_rtt_s);
            let _ = writeln!(s, "loss_probability = {}", pred.loss_probability);
            let _ = writeln!(s, "efficiency = {}", pred.efficiency);
            let _ = writeln!(s, "window_limit_bps = {}", pred.window_limit_bps);
            let _ = writeln!(s, "capacity_limit_bps = {}", pred.capacity_limit_bps);
            match pred.loss_limit_bps {
                Some(l) => {
                    let _ = writeln!(s, "loss_limit_bps = {l}");
                }
                None => s.push_str("loss_limit_bps = unbounded\n"),
            }
            s
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn parse_values<T>(
    raw: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Vec<T>, CliError> {
    let values = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| CliError::Usage(format!("--values: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage(
            "--values must list at least one value".into(),
        ));
    }
    Ok(values)
}

fn u32_value(s: &str, parse: fn(&str) -> crate::Result<u64>) -> Result<u32, String> {
    let v = parse(s).map_err(|e| e.to_string())?;
    u32::try_from(v).map_err(|_| format!("{s} is too large"))
}

fn sweep_points(a: &SweepArgs) -> Result<Vec<ThroughputPoint>, CliError> {
    let link = a.link.link()?;
    let params = a.model.params()?;
    let usage = |e: Error| CliError::Usage(e.to_string());
    match a.kind {
        SweepKind::Buffer => {
            let values = parse_values(
                a.values
                    .as_deref()
                    .unwrap_or("87380,256Ki,512Ki,1Mi,2Mi,4Mi,8Mi,16Mi"),
                byte_size,
            )?;
            let nic = NicConfig::new(a.mtu, a.queue).map_err(usage)?;
            let base = buffer_config(a.buffer)?;
            simulator::sweep_buffer_from(&link, &base, &nic, &params, &values).map_err(usage)
        }
        SweepKind::Mtu => {
            let values = parse_values(a.values.as_deref().unwrap_or("1500,9000,10000"), |s| {
                u32_value(s, units::parse_bytes)
            })?;
            let tcp = buffer_config(a.buffer)?;
            simulator::sweep_mtu(&link, &tcp, &params, &values, a.queue).map_err(usage)
        }
        SweepKind::Queue => {
            let values = parse_values(
                a.values.as_deref().unwrap_or("1000,2000,4000,8000,16000"),
                |s| u32_value(s, units::parse_count),
            )?;
            let tcp = buffer_config(a.buffer)?;
            simulator::sweep_queue(&link, &tcp, &params, &values, a.mtu).map_err(usage)
        }
    }
}

fn cmd_sweep(a: SweepArgs, out: Out<'_>) -> Result<(), CliError> {
    // Everything is computed before the first byte is written, so a failure
    // never leaves a partial table behind.
    let points = sweep_points(&a)?;
    let text = match a.format {
        Format::Csv => simulator::points_to_csv(&points),
        Format::Json => simulator::points_to_json(&points) + "\n",
        Format::Text => {
            let best = simulator::argmax(&points);
            let mut s = format!(
                "{:>12}  {:>22}  {:>12}  limiting\n",
                "x", "throughput_bps", ""
            );
            for (i, p) in points.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{:>12}  {:>22}  {:>12}  {}{}",
                    p.x,
                    p.throughput_bps,
                    display_rate(p.throughput_bps),
                    p.limiting_factor,
                    if Some(i) == best { "  *" } else { "" }
                );
            }
            s
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn usize_bytes(v: Option<u64>, flag: &str) -> Result<Option<usize>, CliError> {
    match v {
        Some(0) => Err(CliError::Usage(format!("{flag} must be > 0"))),
        Some(b) => usize::try_from(b)
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{flag} is too large"))),
        None => Ok(None),
    }
}

/// Streams samples as they arrive and prints the summary at the end.
struct SampleWriter {
    format: Format,
    wrote_header: bool,
}

impl SampleWriter {
    fn new(format: Format) -> Self {
        Self {
            format,
            wrote_header: false,
        }
    }

    fn sample(&mut self, out: &mut (dyn Write + Send), s: &BenchSample) {
        let line = match self.format {
            Format::Json => bench::sample_json(s),
            Format::Csv => {
                if !self.wrote_header {
                    self.wrote_header = true;
                    let _ = writeln!(out, "{}", bench::CSV_HEADER);
                }
                bench::sample_csv_row(s)
            }
            Format::Text => format!(
                "{:8.3} s  {:>12} B  {:>14}  avg {:>14}",
                s.t,
                s.bytes_in_interval,
                display_rate(s.inst_bps),
                display_rate(s.cum_avg_bps)
            ),
        };
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
    }

    fn summary(&self, out: &mut (dyn Write + Send), r: &BenchReport) -> io::Result<()> {
        match self.format {
            Format::Json => writeln!(out, "{}", r.summary_json()),
            Format::Csv => Ok(()),
            Format::Text => {
                let s = &r.summary;
                writeln!(
                    out,
                    "{:?} {}: {} bytes in {:.3} s, mean {} (min {}, max {}), cumulative {}{}",
                    r.side,
                    r.peer,
                    s.total_bytes,
                    s.elapsed_s,
                    display_rate(s.mean_inst_bps),
                    display_rate(s.min_inst_bps),
                    display_rate(s.max_inst_bps),
                    display_rate(s.final_cum_avg_bps),
                    if r.truncated { " [truncated]" } else { "" }
                )
            }
        }
    }
}

fn warn_clamped(err: Out<'_>, r: &BenchReport, name: &str) {
    if let Some(b) = r.buffer {
        let _ = writeln!(
            err,
            "{name}: requested {} B, kernel reports {} B{}",
            b.requested,
            b.effective,
            if b.clamped() { " (clamped)" } else { "" }
        );
    }
}

fn cmd_serve(a: ServeArgs, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let rcvbuf = usize_bytes(a.rcvbuf, "--rcvbuf")?;
    if a.interval.is_zero() {
        return Err(CliError::Usage("--interval must be > 0".into()));
    }
    let server =
        BenchServer::bind(SocketAddr::new(a.bind, a.port), rcvbuf)?.with_interval(a.interval);
    let handle = server.shutdown_handle();
    // Only one handler may be installed per process; a second serve in the
    // same process keeps the first one.
    let _ = ctrlc::set_handler(move || handle.shutdown());
    let _ = writeln!(err, "listening on {}", server.local_addr()?);

    loop {
        let mut writer = SampleWriter::new(a.format);
        let report = server.serve_one(|s| writer.sample(&mut *out, s))?;
        let Some(report) = report else { break };
        warn_clamped(err, &report, "SO_RCVBUF");
        writer.summary(out, &report)?;
        if a.once {
            break;
        }
    }
    Ok(())
}

fn cmd_run(a: RunArgs, out: Out<'_>, err: Out<'_>) -> Result<(), CliError> {
    let mut cfg = BenchRunConfig::new(a.host, a.port, a.duration);
    cfg.sndbuf_bytes = usize_bytes(a.sndbuf, "--sndbuf")?;
    cfg.rcvbuf_bytes = usize_bytes(a.rcvbuf, "--rcvbuf")?;
    cfg.interval = a.interval;
    cfg.payload = match a.pattern {
        Pattern::Zeros => PayloadPattern::Zeros,
        Pattern::Random => PayloadPattern::Pseudorandom { seed: a.seed },
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut writer = SampleWriter::new(a.format);
    let report = bench::run_client_with(&cfg, |s| writer.sample(&mut *out, s))?;
    warn_clamped(err, &report, "SO_SNDBUF");
    writer.summary(out, &report)?;
    Ok(())
}

fn cmd_report(a: ReportArgs, out: Out<'_>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.trace)
        .map_err(|e| Error::io(a.trace.display().to_string(), e))?;
    let (samples, recorded) = bench::parse_jsonl(&text)?;
    let stats = bench::summarize(&samples)?;
    let rendered = match a.format {
        Format::Csv => bench::samples_to_csv(&samples),
        Format::Json => {
            to_json(&json!({
                "summary": stats,
                "side": recorded.as_ref().map(|r| r.side),
                "truncated": recorded.as_ref().map(|r| r.truncated),
            })) + "\n"
        }
        Format::Text => {
            let mut s = format!(
                "{} samples, {} bytes in {} s\nmean_inst_bps = {} ({})\nmin_inst_bps = {}\nmax_inst_bps = {}\nfinal_cum_avg_bps = {}\n",
                stats.samples,
                stats.total_bytes,
                stats.elapsed_s,
                stats.mean_inst_bps,
                display_rate(stats.mean_inst_bps),
                stats.min_inst_bps,
                stats.max_inst_bps,
                stats.final_cum_avg_bps,
            );
            if let Some(r) = recorded {
                let _ = writeln!(s, "side = {:?}, truncated = {}", r.side, r.truncated);
            }
            s
        }
    };
    out.write_all(rendered.as_bytes())?;
    Ok(())
}
