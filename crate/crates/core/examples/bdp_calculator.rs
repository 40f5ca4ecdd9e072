//! Bandwidth-delay product for a link, and whether a buffer covers it.
//!
//! ```text
//! cargo run --example bdp_calculator -- 10G 1.58ms 87380
//! ```

use bdptune::model::{buffer_bits, compute_bdp, needs_tuning, required_buffer_bytes, LinkSpec};
use bdptune::units::{display_bits, parse_bytes, parse_duration_s, parse_rate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let capacity = parse_rate(args.first().map_or("1G", String::as_str))?;
    let rtt = parse_duration_s(args.get(1).map_or("0.12ms", String::as_str))?;
    let buffer = parse_bytes(args.get(2).map_or("87380", String::as_str))?;

    let bdp = compute_bdp(&LinkSpec::new(capacity, rtt)?);
    println!(
        "bdp       = {} bits ({})",
        bdp.value(),
        display_bits(bdp.value())
    );
    println!(
        "buffer    = {} B ({})",
        buffer,
        display_bits(buffer_bits(buffer) as f64)
    );
    println!("tune?     = {}", needs_tuning(buffer, bdp));
    println!("2x bdp    = {} B", required_buffer_bytes(bdp, 2.0));
    Ok(())
}
