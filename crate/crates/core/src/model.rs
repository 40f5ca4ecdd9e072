//! Bandwidth-delay product arithmetic, the buffer sizing criterion and the
//! recommendation engine.
//!
//! Everything here is a pure function over immutable values. Rates are in
//! bits per second, times in seconds, buffer sizes in bytes, and BDPs in
//! bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::ModelParams;
use crate::units::display_bits;

/// Kernel minimum for socket buffers; also the rounding granularity used when
/// recommending new ceilings.
pub const PAGE_BYTES: u64 = 4096;

/// Safety margin applied on top of the BDP when sizing buffers.
pub const DEFAULT_HEADROOM: f64 = 2.0;

pub const DEFAULT_MTU: u32 = 1500;
pub const DEFAULT_TXQUEUELEN: u32 = 1000;

/// Queue lengths that were measured on a 10 Gbps path; recommendations snap
/// to one of these.
pub const TESTED_QUEUE_LENGTHS: [u32; 4] = [1000, 2000, 4000, 8000];

const GBPS: f64 = 1e9;
const TEN_GBPS: f64 = 1e10;

/// Physical path description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    capacity_bps: f64,
    base_rtt_s: f64,
    loss_rate: f64,
}

impl LinkSpec {
    pub fn new(capacity_bps: f64, base_rtt_s: f64) -> Result<Self> {
        Self::with_loss(capacity_bps, base_rtt_s, 0.0)
    }

    pub fn with_loss(capacity_bps: f64, base_rtt_s: f64, loss_rate: f64) -> Result<Self> {
        if !(capacity_bps.is_finite() && capacity_bps > 0.0) {
            return Err(Error::invalid(
                "link",
                format!("capacity must be a positive finite rate, got {capacity_bps}"),
            ));
        }
        if !(base_rtt_s.is_finite() && base_rtt_s >= 0.0) {
            return Err(Error::invalid(
                "link",
                format!("base RTT must be a non-negative finite time, got {base_rtt_s}"),
            ));
        }
        if !(0.0..=1.0).contains(&loss_rate) {
            return Err(Error::invalid(
                "link",
                format!("loss rate must lie in [0, 1], got {loss_rate}"),
            ));
        }
        Ok(Self {
            capacity_bps,
            base_rtt_s,
            loss_rate,
        })
    }

    pub fn capacity_bps(&self) -> f64 {
        self.capacity_bps
    }

    pub fn base_rtt_s(&self) -> f64 {
        self.base_rtt_s
    }

    pub fn loss_rate(&self) -> f64 {
        self.loss_rate
    }
}

/// A bandwidth-delay product in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BdpBits(f64);

impl BdpBits {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn bytes(self) -> f64 {
        self.0 / 8.0
    }
}

impl fmt::Display for BdpBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&display_bits(self.0))
    }
}

/// A kernel `(min, default, max)` byte triple as used by `tcp_rmem` and
/// `tcp_wmem`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ByteTriple {
    pub min: u64,
    pub default: u64,
    pub max: u64,
}

impl ByteTriple {
    pub fn new(min: u64, default: u64, max: u64) -> Result<Self> {
        let triple = Self { min, default, max };
        triple.validate()?;
        Ok(triple)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min == 0 {
            return Err(Error::invalid("byte triple", "min must be > 0"));
        }
        if self.min > self.default || self.default > self.max {
            return Err(Error::invalid(
                "byte triple",
                format!(
                    "expected min <= default <= max, got {} {} {}",
                    self.min, self.default, self.max
                ),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for ByteTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.min, self.default, self.max)
    }
}

/// Socket buffer tunables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcpBufferConfig {
    pub rmem: ByteTriple,
    pub wmem: ByteTriple,
    pub rmem_max: u64,
    pub wmem_max: u64,
    pub sack_enabled: bool,
    pub moderate_rcvbuf: bool,
}

impl TcpBufferConfig {
    /// Stock Linux values: 4096-byte minimum, 16384 / 87380 initial sizes.
    pub const fn linux_defaults() -> Self {
        let triple = ByteTriple {
            min: 4096,
            default: 16384,
            max: 87380,
        };
        Self {
            rmem: triple,
            wmem: triple,
            rmem_max: 212_992,
            wmem_max: 212_992,
            sack_enabled: true,
            moderate_rcvbuf: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rmem.validate()?;
        self.wmem.validate()?;
        if self.rmem_max == 0 || self.wmem_max == 0 {
            return Err(Error::invalid(
                "buffer config",
                "rmem_max and wmem_max must be > 0",
            ));
        }
        Ok(())
    }

    /// Sets all four buffer ceilings to `bytes`, pulling min/default down
    /// where needed so the triples stay ordered.
    pub fn with_max_buffers(mut self, bytes: u64) -> Self {
        for triple in [&mut self.rmem, &mut self.wmem] {
            triple.max = bytes;
            triple.default = triple.default.min(bytes);
            triple.min = triple.min.min(triple.default);
        }
        self.rmem_max = bytes;
        self.wmem_max = bytes;
        self
    }

    /// The smallest of the four ceilings, i.e. the largest window a single
    /// connection can use.
    pub fn window_bytes(&self) -> u64 {
        self.rmem
            .max
            .min(self.wmem.max)
            .min(self.rmem_max)
            .min(self.wmem_max)
    }
}

impl Default for TcpBufferConfig {
    fn default() -> Self {
        Self::linux_defaults()
    }
}

/// Interface settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NicConfig {
    mtu_bytes: u32,
    txqueuelen_packets: u32,
}

impl NicConfig {
    pub fn new(mtu_bytes: u32, txqueuelen_packets: u32) -> Result<Self> {
        if mtu_bytes <= 40 {
            return Err(Error::invalid(
                "nic config",
                format!("MTU must exceed 40 bytes of IP+TCP headers, got {mtu_bytes}"),
            ));
        }
        if txqueuelen_packets == 0 {
            return Err(Error::invalid("nic config", "txqueuelen must be >= 1"));
        }
        Ok(Self {
            mtu_bytes,
            txqueuelen_packets,
        })
    }

    pub fn mtu_bytes(&self) -> u32 {
        self.mtu_bytes
    }

    pub fn txqueuelen_packets(&self) -> u32 {
        self.txqueuelen_packets
    }
}

impl Default for NicConfig {
    fn default() -> Self {
        Self {
            mtu_bytes: DEFAULT_MTU,
            txqueuelen_packets: DEFAULT_TXQUEUELEN,
        }
    }
}

/// The tunables the advisor knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tunable {
    TcpRmem,
    TcpWmem,
    RmemMax,
    WmemMax,
    TcpSack,
    TcpModerateRcvbuf,
    Mtu,
    Txqueuelen,
}

impl Tunable {
    pub const ALL: [Tunable; 8] = [
        Tunable::TcpRmem,
        Tunable::TcpWmem,
        Tunable::RmemMax,
        Tunable::WmemMax,
        Tunable::TcpSack,
        Tunable::TcpModerateRcvbuf,
        Tunable::Mtu,
        Tunable::Txqueuelen,
    ];

    /// Display name: the sysctl dotted name for kernel tunables, the `ip link`
    /// attribute for interface settings.
    pub fn name(self) -> &'static str {
        match self {
            Tunable::TcpRmem => "net.ipv4.tcp_rmem",
            Tunable::TcpWmem => "net.ipv4.tcp_wmem",
            Tunable::RmemMax => "net.core.rmem_max",
            Tunable::WmemMax => "net.core.wmem_max",
            Tunable::TcpSack => "net.ipv4.tcp_sack",
            Tunable::TcpModerateRcvbuf => "net.ipv4.tcp_moderate_rcvbuf",
            Tunable::Mtu => "mtu",
            Tunable::Txqueuelen => "txqueuelen",
        }
    }

    pub fn is_sysctl(self) -> bool {
        !matches!(self, Tunable::Mtu | Tunable::Txqueuelen)
    }

    pub fn is_buffer(self) -> bool {
        matches!(
            self,
            Tunable::TcpRmem | Tunable::TcpWmem | Tunable::RmemMax | Tunable::WmemMax
        )
    }
}

impl fmt::Display for Tunable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of advice: what a tunable is, what it should be, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub key: Tunable,
    pub current: String,
    pub recommended: String,
    pub rationale: String,
    pub changed: bool,
}

impl Recommendation {
    pub fn new(
        key: Tunable,
        current: impl ToString,
        recommended: impl ToString,
        rationale: impl Into<String>,
    ) -> Self {
        let current = current.to_string();
        let recommended = recommended.to_string();
        Self {
            key,
            changed: current != recommended,
            current,
            recommended,
            rationale: rationale.into(),
        }
    }
}

/// The four measured environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 1 Gbps LAN between two hosts, 0.12 ms RTT.
    HomeLan,
    /// 10 Mbps broadband; the RTT is not known and must be supplied.
    HomeDsl,
    /// 1 Gbps datacenter VMs, 1.49 ms RTT.
    Dc1g,
    /// 10 Gbps datacenter VMs, 1.58 ms RTT.
    Dc10g,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::HomeLan,
        Preset::HomeDsl,
        Preset::Dc1g,
        Preset::Dc10g,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::HomeLan => "home-lan",
            Preset::HomeDsl => "home-dsl",
            Preset::Dc1g => "dc-1g",
            Preset::Dc10g => "dc-10g",
        }
    }

    pub fn capacity_bps(self) -> f64 {
        match self {
            Preset::HomeLan | Preset::Dc1g => 1e9,
            Preset::HomeDsl => 1e7,
            Preset::Dc10g => 1e10,
        }
    }

    /// The preset's RTT, if it has one.
    pub fn base_rtt_s(self) -> Option<f64> {
        match self {
            Preset::HomeLan => Some(0.12e-3),
            Preset::HomeDsl => None,
            Preset::Dc1g => Some(1.49e-3),
            Preset::Dc10g => Some(1.58e-3),
        }
    }

    /// Builds the preset's link. `rtt_override` replaces the preset RTT and
    /// is required for [`Preset::HomeDsl`].
    pub fn link(self, rtt_override: Option<f64>) -> Result<LinkSpec> {
        let rtt = rtt_override.or(self.base_rtt_s()).ok_or_else(|| {
            Error::invalid(
                "preset",
                format!("{} has no known RTT; supply one explicitly", self.name()),
            )
        })?;
        LinkSpec::new(self.capacity_bps(), rtt)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse {
                input: s.to_owned(),
                token: s.to_owned(),
                reason: "expected one of home-lan, home-dsl, dc-1g, dc-10g".into(),
            })
    }
}

pub fn compute_bdp(link: &LinkSpec) -> BdpBits {
    BdpBits(link.capacity_bps * link.base_rtt_s)
}

pub fn buffer_bits(buffer_bytes: u64) -> u64 {
    buffer_bytes * 8
}

/// True when the buffer cannot hold one BDP. A buffer exactly equal to the
/// BDP counts as sufficient.
pub fn needs_tuning(buffer_bytes: u64, bdp: BdpBits) -> bool {
    (buffer_bits(buffer_bytes) as f64) < bdp.value()
}

/// The buffer ceiling needed to hold `headroom` BDPs, rounded up to a whole
/// number of pages.
pub fn required_buffer_bytes(bdp: BdpBits, headroom: f64) -> u64 {
    let bytes = (headroom * bdp.value() / 8.0).ceil() as u64;
    bytes.div_ceil(PAGE_BYTES) * PAGE_BYTES
}

/// Raises every buffer ceiling to at least `headroom × bdp`. Ceilings are
/// never lowered; min and default are left alone. SACK and receive-buffer
/// moderation are switched on.
pub fn recommend_buffer(bdp: BdpBits, headroom: f64, current: &TcpBufferConfig) -> TcpBufferConfig {
    debug_assert!(headroom >= 1.0, "headroom below 1 undersizes the buffer");
    let target = required_buffer_bytes(bdp, headroom);
    let mut next = *current;
    next.rmem.max = next.rmem.max.max(target);
    next.wmem.max = next.wmem.max.max(target);
    next.rmem_max = next.rmem_max.max(target);
    next.wmem_max = next.wmem_max.max(target);
    next.sack_enabled = true;
    next.moderate_rcvbuf = true;
    next
}

/// Fraction of the wire rate left for payload at a given MTU.
pub fn protocol_efficiency(mtu_bytes: u32, params: &ModelParams) -> Result<f64> {
    if mtu_bytes <= params.header_overhead_bytes {
        return Err(Error::MtuTooSmall {
            mtu: mtu_bytes,
            overhead: params.header_overhead_bytes,
        });
    }
    let payload = f64::from(mtu_bytes - params.header_overhead_bytes);
    Ok(payload / (f64::from(mtu_bytes) + f64::from(params.framing_overhead_bytes)))
}

/// Jumbo frames above 1 Gbps on a clean path, the standard 1500 otherwise.
pub fn recommend_mtu(link: &LinkSpec, params: &ModelParams) -> u32 {
    if link.capacity_bps > GBPS && link.loss_rate <= params.loss_threshold {
        params.jumbo_mtu_bytes
    } else {
        DEFAULT_MTU
    }
}

pub fn recommend_txqueuelen(link: &LinkSpec) -> u32 {
    let capacity = link.capacity_bps;
    if capacity <= GBPS {
        return DEFAULT_TXQUEUELEN;
    }
    if capacity >= TEN_GBPS {
        return 8000;
    }
    let interpolated = 1000.0 + (capacity - GBPS) / (TEN_GBPS - GBPS) * 7000.0;
    TESTED_QUEUE_LENGTHS
        .into_iter()
        .min_by(|a, b| {
            let da = (f64::from(*a) - interpolated).abs();
            let db = (f64::from(*b) - interpolated).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(DEFAULT_TXQUEUELEN)
}

fn flag(enabled: bool) -> &'static str {
    if enabled {
        "1"
    } else {
        "0"
    }
}

/// Runs every criterion over the current configuration using the default
/// headroom.
pub fn advise(
    link: &LinkSpec,
    tcp: &TcpBufferConfig,
    nic: &NicConfig,
    params: &ModelParams,
) -> Vec<Recommendation> {
    advise_with_headroom(link, tcp, nic, params, DEFAULT_HEADROOM)
}

pub fn advise_with_headroom(
    link: &LinkSpec,
    tcp: &TcpBufferConfig,
    nic: &NicConfig,
    params: &ModelParams,
    headroom: f64,
) -> Vec<Recommendation> {
    let bdp = compute_bdp(link);
    let target = required_buffer_bytes(bdp, headroom);
    let next = recommend_buffer(bdp, headroom, tcp);

    let buffer_reason = |current_max: u64| {
        if needs_tuning(current_max, bdp) {
            format!(
                "BDP is {bdp}; a {} ceiling is below it, raise to {headroom}x BDP = {target} B",
                display_bits(buffer_bits(current_max) as f64)
            )
        } else if current_max >= target {
            format!(
                "BDP is {bdp}; ceiling of {} already covers {headroom}x BDP",
                display_bits(buffer_bits(current_max) as f64)
            )
        } else {
            format!(
                "BDP is {bdp}; ceiling of {} exceeds the BDP but is raised to {headroom}x BDP = {target} B",
                display_bits(buffer_bits(current_max) as f64)
            )
        }
    };

    let mtu = recommend_mtu(link, params);
    let mtu_reason = if mtu == DEFAULT_MTU {
        if link.capacity_bps > GBPS {
            format!(
                "loss rate {} exceeds {}; keep standard frames",
                link.loss_rate, params.loss_threshold
            )
        } else {
            "link is 1 Gbps or slower; jumbo frames add nothing".to_owned()
        }
    } else {
        format!(
            "link faster than 1 Gbps with loss <= {}; larger frames cut per-packet overhead",
            params.loss_threshold
        )
    };

    let qlen = recommend_txqueuelen(link);
    let qlen_reason = if qlen == DEFAULT_TXQUEUELEN {
        "default queue is sufficient at 1 Gbps and below".to_owned()
    } else {
        format!(
            "{} link needs a longer transmit queue than the default",
            crate::units::display_rate(link.capacity_bps)
        )
    };

    vec![
        Recommendation::new(
            Tunable::TcpRmem,
            tcp.rmem,
            next.rmem,
            buffer_reason(tcp.rmem.max),
        ),
        Recommendation::new(
            Tunable::TcpWmem,
            tcp.wmem,
            next.wmem,
            buffer_reason(tcp.wmem.max),
        ),
        Recommendation::new(
            Tunable::RmemMax,
            tcp.rmem_max,
            next.rmem_max,
            buffer_reason(tcp.rmem_max),
        ),
        Recommendation::new(
            Tunable::WmemMax,
            tcp.wmem_max,
            next.wmem_max,
            buffer_reason(tcp.wmem_max),
        ),
        Recommendation::new(
            Tunable::TcpSack,
            flag(tcp.sack_enabled),
            flag(next.sack_enabled),
            "selective acknowledgements retransmit only the missing segments",
        ),
        Recommendation::new(
            Tunable::TcpModerateRcvbuf,
            flag(tcp.moderate_rcvbuf),
            flag(next.moderate_rcvbuf),
            "keep receive-buffer autotuning on so raised ceilings are actually used",
        ),
        Recommendation::new(Tunable::Mtu, nic.mtu_bytes, mtu, mtu_reason),
        Recommendation::new(
            Tunable::Txqueuelen,
            nic.txqueuelen_packets,
            qlen,
            qlen_reason,
        ),
    ]
}

/// Applies a set of recommendations to a configuration, returning the
/// configuration the advice describes.
pub fn apply(
    recs: &[Recommendation],
    tcp: &TcpBufferConfig,
    nic: &NicConfig,
) -> Result<(TcpBufferConfig, NicConfig)> {
    let mut tcp = *tcp;
    let mut mtu = nic.mtu_bytes;
    let mut qlen = nic.txqueuelen_packets;
    for rec in recs {
        let value = rec.recommended.as_str();
        match rec.key {
            Tunable::TcpRmem => tcp.rmem = crate::sysctl::parse_triple(value)?,
            Tunable::TcpWmem => tcp.wmem = crate::sysctl::parse_triple(value)?,
            Tunable::RmemMax => tcp.rmem_max = crate::sysctl::parse_scalar(value)?,
            Tunable::WmemMax => tcp.wmem_max = crate::sysctl::parse_scalar(value)?,
            Tunable::TcpSack => tcp.sack_enabled = crate::sysctl::parse_bool(value)?,
            Tunable::TcpModerateRcvbuf => tcp.moderate_rcvbuf = crate::sysctl::parse_bool(value)?,
            Tunable::Mtu => mtu = parse_u32(value)?,
            Tunable::Txqueuelen => qlen = parse_u32(value)?,
        }
    }
    tcp.validate()?;
    Ok((tcp, NicConfig::new(mtu, qlen)?))
}

fn parse_u32(value: &str) -> Result<u32> {
    value
        .trim()
        .parse()
        .map_err(|e: std::num::ParseIntError| Error::Parse {
            input: value.to_owned(),
            token: value.trim().to_owned(),
            reason: e.to_string(),
        })
}
