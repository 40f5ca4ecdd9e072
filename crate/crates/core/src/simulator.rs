//! Deterministic flow-level model of steady-state TCP throughput.
//!
//! A single flow is limited by the smallest of three rates:
//!
//! * **window**: the usable socket buffer divided by the effective RTT,
//! * **capacity**: the link rate times the protocol efficiency at the MTU,
//! * **loss**: the classical `MSS / RTT · sqrt(3 / 2p)` steady-state bound.
//!
//! Any window beyond one BDP piles up in the interface transmit queue. The
//! part the queue holds inflates the RTT; the part that does not fit is
//! dropped, which adds an overflow loss component. Overflow stops once the
//! queue can absorb either the whole overshoot or one BDP of data, so a
//! longer queue first removes overflow loss and then only adds delay.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_bdp, protocol_efficiency, LinkSpec, NicConfig, TcpBufferConfig};

/// Floor applied to the effective RTT so back-to-back hosts do not divide by
/// zero.
pub const MIN_RTT_S: f64 = 1e-6;

/// Calibration constants of the throughput model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    /// IP + TCP headers carried inside every MTU.
    pub header_overhead_bytes: u32,
    /// Ethernet preamble, header, FCS and inter-frame gap outside the MTU.
    pub framing_overhead_bytes: u32,
    /// Share of the socket buffer usable as window.
    pub window_fraction: f64,
    /// Loss probability when the queue absorbs none of the window overshoot.
    pub overflow_loss_coeff: f64,
    pub background_loss: f64,
    /// Highest path loss rate at which jumbo frames are still recommended.
    pub loss_threshold: f64,
    pub jumbo_mtu_bytes: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            header_overhead_bytes: 40,
            framing_overhead_bytes: 38,
            window_fraction: 1.0,
            overflow_loss_coeff: 0.02,
            background_loss: 1e-7,
            loss_threshold: 1e-4,
            jumbo_mtu_bytes: 9000,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if self.header_overhead_bytes == 0 || self.framing_overhead_bytes == 0 {
            return Err(Error::invalid("model params", "overheads must be positive"));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::invalid(
                "model params",
                format!(
                    "window_fraction must lie in (0, 1], got {}",
                    self.window_fraction
                ),
            ));
        }
        for (name, value) in [
            ("overflow_loss_coeff", self.overflow_loss_coeff),
            ("background_loss", self.background_loss),
            ("loss_threshold", self.loss_threshold),
        ] {
            if !unit.contains(&value) {
                return Err(Error::invalid(
                    "model params",
                    format!("{name} must lie in [0, 1], got {value}"),
                ));
            }
        }
        if self.jumbo_mtu_bytes <= self.header_overhead_bytes {
            return Err(Error::invalid(
                "model params",
                "jumbo MTU must exceed the header overhead",
            ));
        }
        Ok(())
    }
}

/// Which rate bound set the predicted throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitingFactor {
    Window,
    Capacity,
    Loss,
}

impl LimitingFactor {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitingFactor::Window => "window",
            LimitingFactor::Capacity => "capacity",
            LimitingFactor::Loss => "loss",
        }
    }
}

impl std::fmt::Display for LimitingFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full model evaluation for one configuration, intermediate terms included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub throughput_bps: f64,
    pub limiting_factor: LimitingFactor,
    pub mss_bits: f64,
    pub efficiency: f64,
    pub window_bits: f64,
    pub bdp_bits: f64,
    pub excess_bits: f64,
    pub queue_capacity_bits: f64,
    pub queue_occupancy_bits: f64,
    pub effective_rtt_s: f64,
    pub loss_probability: f64,
    pub window_limit_bps: f64,
    pub capacity_limit_bps: f64,
    /// `None` when the loss probability is zero.
    pub loss_limit_bps: Option<f64>,
}

impl Prediction {
    pub fn at(&self, x: u64) -> ThroughputPoint {
        ThroughputPoint {
            x,
            throughput_bps: self.throughput_bps,
            limiting_factor: self.limiting_factor,
        }
    }
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    /// Swept value: bytes for buffer and MTU sweeps, packets for queue sweeps.
    pub x: u64,
    pub throughput_bps: f64,
    pub limiting_factor: LimitingFactor,
}

pub fn simulate_throughput(
    link: &LinkSpec,
    tcp: &TcpBufferConfig,
    nic: &NicConfig,
    params: &ModelParams,
) -> Result<Prediction> {
    params.validate()?;
    let capacity = link.capacity_bps();
    let mtu = nic.mtu_bytes();
    let efficiency = protocol_efficiency(mtu, params)?;
    let mss_bits = 8.0 * f64::from(mtu - params.header_overhead_bytes);

    let window_bits = 8.0 * params.window_fraction * tcp.window_bytes() as f64;
    let bdp_bits = compute_bdp(link).value();
    let excess_bits = (window_bits - bdp_bits).max(0.0);

    let queue_capacity_bits = f64::from(nic.txqueuelen_packets()) * f64::from(mtu) * 8.0;
    let queue_occupancy_bits = excess_bits.min(queue_capacity_bits);
    let effective_rtt_s = (link.base_rtt_s() + queue_occupancy_bits / capacity).max(MIN_RTT_S);

    let absorb_bits = excess_bits.min(bdp_bits);
    let overflow = if excess_bits > 0.0 && absorb_bits > 0.0 {
        params.overflow_loss_coeff * (1.0 - queue_capacity_bits / absorb_bits).max(0.0)
    } else {
        0.0
    };
    let loss_probability = (params.background_loss + overflow + link.loss_rate()).min(1.0);

    let window_limit_bps = window_bits / effective_rtt_s;
    let capacity_limit_bps = capacity * efficiency;
    let loss_limit_bps = (loss_probability > 0.0)
        .then(|| mss_bits / effective_rtt_s * (1.5 / loss_probability).sqrt());

    let mut throughput_bps = window_limit_bps;
    let mut limiting_factor = LimitingFactor::Window;
    if capacity_limit_bps < throughput_bps {
        throughput_bps = capacity_limit_bps;
        limiting_factor = LimitingFactor::Capacity;
    }
    if let Some(loss_limit) = loss_limit_bps {
        if loss_limit < throughput_bps {
            throughput_bps = loss_limit;
            limiting_factor = LimitingFactor::Loss;
        }
    }

    Ok(Prediction {
        throughput_bps,
        limiting_factor,
        mss_bits,
        efficiency,
        window_bits,
        bdp_bits,
        excess_bits,
        queue_capacity_bits,
        queue_occupancy_bits,
        effective_rtt_s,
        loss_probability,
        window_limit_bps,
        capacity_limit_bps,
        loss_limit_bps,
    })
}

/// Sweeps all four buffer ceilings over `buffer_values` (bytes).
pub fn sweep_buffer(
    link: &LinkSpec,
    nic: &NicConfig,
    params: &ModelParams,
    buffer_values: &[u64],
) -> Result<Vec<ThroughputPoint>> {
    sweep_buffer_from(
        link,
        &TcpBufferConfig::linux_defaults(),
        nic,
        params,
        buffer_values,
    )
}

/// Like [`sweep_buffer`] but starting from an explicit base configuration.
pub fn sweep_buffer_from(
    link: &LinkSpec,
    base: &TcpBufferConfig,
    nic: &NicConfig,
    params: &ModelParams,
    buffer_values: &[u64],
) -> Result<Vec<ThroughputPoint>> {
    buffer_values
        .iter()
        .map(|&bytes| {
            if bytes == 0 {
                return Err(Error::invalid("buffer sweep", "buffer sizes must be > 0"));
            }
            let tcp = base.with_max_buffers(bytes);
            Ok(simulate_throughput(link, &tcp, nic, params)?.at(bytes))
        })
        .collect()
}

pub fn sweep_mtu(
    link: &LinkSpec,
    tcp: &TcpBufferConfig,
    params: &ModelParams,
    mtu_values: &[u32],
    queue: u32,
) -> Result<Vec<ThroughputPoint>> {
    mtu_values
        .iter()
        .map(|&mtu| {
            if mtu <= params.header_overhead_bytes {
                return Err(Error::MtuTooSmall {
                    mtu,
                    overhead: params.header_overhead_bytes,
                });
            }
            let nic = NicConfig::new(mtu, queue)?;
            Ok(simulate_throughput(link, tcp, &nic, params)?.at(u64::from(mtu)))
        })
        .collect()
}

pub fn sweep_queue(
    link: &LinkSpec,
    tcp: &TcpBufferConfig,
    params: &ModelParams,
    queue_values: &[u32],
    mtu: u32,
) -> Result<Vec<ThroughputPoint>> {
    queue_values
        .iter()
        .map(|&queue| {
            let nic = NicConfig::new(mtu, queue)?;
            Ok(simulate_throughput(link, tcp, &nic, params)?.at(u64::from(queue)))
        })
        .collect()
}

/// Index of the highest-throughput point; the first one wins ties.
pub fn argmax(points: &[ThroughputPoint]) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, p)| match best {
            Some((_, t)) if t >= p.throughput_bps => best,
            _ => Some((i, p.throughput_bps)),
        })
        .map(|(i, _)| i)
}

pub const CSV_HEADER: &str = "x,throughput_bps,limiting_factor";

/// Renders points as CSV with a `x,throughput_bps,limiting_factor` header.
pub fn points_to_csv(points: &[ThroughputPoint]) -> String {
    let mut out = String::with_capacity(32 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.x, p.throughput_bps, p.limiting_factor
        ));
    }
    out
}

pub fn write_csv(points: &[ThroughputPoint], mut w: impl Write) -> std::io::Result<()> {
    w.write_all(points_to_csv(points).as_bytes())
}

pub fn points_to_json(points: &[ThroughputPoint]) -> String {
    serde_json::to_string_pretty(points).expect("points always serialize")
}
