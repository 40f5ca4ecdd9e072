//! TCP tuning toolkit.
//!
//! * [`model`]: bandwidth-delay products, the buffer criterion, and the
//!   advisor that maps a link plus current settings to recommended tunables.
//! * [`simulator`]: a deterministic flow-level throughput model with buffer,
//!   MTU and queue-length sweeps.
//! * [`sysctl`]: reads `/proc/sys`-style trees and emits `sysctl.conf`
//!   snippets and `ip link` commands. It never writes to a live kernel.
//! * [`probe`]: RTT measurement by timing TCP handshakes.
//! * [`bench`]: a single-stream discard server and streaming client that
//!   record per-second throughput.
//! * [`cli`]: the `bdptune` command-line frontend.
//!
//! ```
//! use bdptune::model::{compute_bdp, needs_tuning, Preset};
//!
//! let link = Preset::Dc10g.link(None).unwrap();
//! let bdp = compute_bdp(&link);
//! assert_eq!(bdp.value(), 15_800_000.0);
//! assert!(needs_tuning(87_380, bdp));
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod model;
pub mod probe;
pub mod simulator;
pub mod sysctl;
pub mod units;

pub use error::{Error, Result};
pub use model::{
    advise, compute_bdp, needs_tuning, recommend_buffer, BdpBits, ByteTriple, LinkSpec, NicConfig,
    Preset, Recommendation, TcpBufferConfig, Tunable,
};
pub use simulator::{simulate_throughput, LimitingFactor, ModelParams, ThroughputPoint};
