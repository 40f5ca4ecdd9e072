//! Human-readable quantities.
//!
//! Rates and bit counts use decimal prefixes (`K` = 1000). Byte sizes accept
//! both decimal (`K`, `M`, `G`) and binary (`Ki`, `Mi`, `Gi`) prefixes.
//! Times accept `s`, `ms`, `us` and `ns`; a bare number is seconds.
//!
//! Decimal suffixes are folded into the exponent before the number is
//! parsed, so `0.12ms` yields exactly the same `f64` as `0.12e-3`.

use crate::error::{Error, Result};

fn parse_error(input: &str, token: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        input: input.to_owned(),
        token: token.to_owned(),
        reason: reason.into(),
    }
}

/// Splits `"12.5ms"` into `("12.5", "ms")`.
fn split_number(input: &str) -> (&str, &str) {
    let s = input.trim();
    let bytes = s.as_bytes();
    let mut end = 0;
    while end < bytes.len() {
        let c = bytes[end];
        let exponent = (c == b'e' || c == b'E')
            && end > 0
            && bytes
                .get(end + 1)
                .is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+');
        let sign_after_exponent =
            (c == b'-' || c == b'+') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
        let leading_sign = end == 0 && (c == b'-' || c == b'+');
        if c.is_ascii_digit() || c == b'.' || exponent || sign_after_exponent || leading_sign {
            end += 1;
        } else {
            break;
        }
    }
    (&s[..end], s[end..].trim())
}

/// Parses `number` scaled by `10^exp10`, exactly when the number has no
/// exponent of its own.
fn scaled_decimal(input: &str, number: &str, exp10: i32) -> Result<f64> {
    if number.is_empty() {
        return Err(parse_error(input, input, "expected a number"));
    }
    let value: f64 = if exp10 == 0 {
        number.parse()
    } else if number.contains(['e', 'E']) {
        number.parse::<f64>().map(|v| v * 10f64.powi(exp10))
    } else {
        format!("{number}e{exp10}").parse()
    }
    .map_err(|_| parse_error(input, number, "not a number"))?;
    if !value.is_finite() {
        return Err(parse_error(input, number, "not finite"));
    }
    Ok(value)
}

/// Parses a rate in bits per second: `1e9`, `10G`, `100Mbps`, `1.5Gbit`.
pub fn parse_rate(input: &str) -> Result<f64> {
    let (number, unit) = split_number(input);
    let unit = unit
        .strip_suffix("bps")
        .or_else(|| unit.strip_suffix("bit/s"))
        .or_else(|| unit.strip_suffix("bit"))
        .unwrap_or(unit);
    let exp = match unit {
        "" => 0,
        "K" | "k" => 3,
        "M" => 6,
        "G" => 9,
        "T" => 12,
        other => return Err(parse_error(input, other, "unknown rate unit")),
    };
    let value = scaled_decimal(input, number, exp)?;
    if value <= 0.0 {
        return Err(parse_error(input, number, "rate must be positive"));
    }
    Ok(value)
}

/// Parses a duration in seconds: `0.12ms`, `120us`, `1.5s`, `0.002`.
pub fn parse_duration_s(input: &str) -> Result<f64> {
    let (number, unit) = split_number(input);
    let exp = match unit {
        "" | "s" => 0,
        "ms" => -3,
        "us" | "µs" => -6,
        "ns" => -9,
        other => return Err(parse_error(input, other, "unknown time unit")),
    };
    let value = scaled_decimal(input, number, exp)?;
    if value < 0.0 {
        return Err(parse_error(input, number, "time must be non-negative"));
    }
    Ok(value)
}

/// Parses a byte size: `87380`, `4M` (4,000,000), `4Mi` (4,194,304), `16KiB`.
pub fn parse_bytes(input: &str) -> Result<u64> {
    let (number, unit) = split_number(input);
    let unit = unit.strip_suffix('B').unwrap_or(unit);
    let multiplier: u64 = match unit {
        "" => 1,
        "K" | "k" => 1_000,
        "M" => 1_000_000,
        "G" => 1_000_000_000,
        "Ki" => 1 << 10,
        "Mi" => 1 << 20,
        "Gi" => 1 << 30,
        other => return Err(parse_error(input, other, "unknown size unit")),
    };
    if number.is_empty() {
        return Err(parse_error(input, input, "expected a number"));
    }
    if let Ok(whole) = number.parse::<u64>() {
        return whole
            .checked_mul(multiplier)
            .ok_or_else(|| parse_error(input, number, "size overflows"));
    }
    let value: f64 = number
        .parse()
        .map_err(|_| parse_error(input, number, "not a number"))?;
    let bytes = value * multiplier as f64;
    if !(bytes.is_finite() && bytes >= 0.0 && bytes.fract() == 0.0 && bytes < u64::MAX as f64) {
        return Err(parse_error(input, number, "not a whole number of bytes"));
    }
    Ok(bytes as u64)
}

/// Parses a plain count with optional decimal `K` suffix (`16K` = 16000).
pub fn parse_count(input: &str) -> Result<u64> {
    let (number, unit) = split_number(input);
    let multiplier = match unit {
        "" => 1,
        "K" | "k" => 1000,
        other => return Err(parse_error(input, other, "unknown count unit")),
    };
    number
        .parse::<u64>()
        .ok()
        .and_then(|n| n.checked_mul(multiplier))
        .ok_or_else(|| parse_error(input, number, "expected a whole number"))
}

fn trim_decimals(value: f64, places: usize) -> String {
    let s = format!("{value:.places$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn with_prefix(value: f64, unit: &str) -> String {
    let abs = value.abs();
    let (scaled, prefix) = if abs >= 1e12 {
        (value / 1e12, "T")
    } else if abs >= 1e9 {
        (value / 1e9, "G")
    } else if abs >= 1e6 {
        (value / 1e6, "M")
    } else if abs >= 1e3 {
        (value / 1e3, "K")
    } else {
        (value, "")
    };
    format!("{} {prefix}{unit}", trim_decimals(scaled, 2))
}

/// `699040.0` → `"699.04 Kbit"`.
pub fn display_bits(bits: f64) -> String {
    with_prefix(bits, "bit")
}

/// `9.4928e8` → `"949.28 Mbps"`.
pub fn display_rate(bps: f64) -> String {
    with_prefix(bps, "bps")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations_match_literals_exactly() {
        assert_eq!(parse_duration_s("0.12ms").unwrap(), 0.12e-3);
        assert_eq!(parse_duration_s("1.49ms").unwrap(), 1.49e-3);
        assert_eq!(parse_duration_s("1.58ms").unwrap(), 1.58e-3);
        assert_eq!(parse_duration_s("120us").unwrap(), 120e-6);
        assert_eq!(parse_duration_s("0.5").unwrap(), 0.5);
        assert_eq!(parse_duration_s("2s").unwrap(), 2.0);
        assert_eq!(parse_duration_s("1.2e-1ms").unwrap(), 1.2e-1 * 1e-3);
        assert!(parse_duration_s("0.12xs").is_err());
        assert!(parse_duration_s("ms").is_err());
        assert!(parse_duration_s("-1ms").is_err());
    }

    #[test]
    fn rates() {
        assert_eq!(parse_rate("1e9").unwrap(), 1e9);
        assert_eq!(parse_rate("10G").unwrap(), 1e10);
        assert_eq!(parse_rate("10Gbps").unwrap(), 1e10);
        assert_eq!(parse_rate("100Mbit").unwrap(), 1e8);
        assert!(parse_rate("0").is_err());
        assert!(parse_rate("10Q").is_err());
    }

    #[test]
    fn byte_sizes() {
        assert_eq!(parse_bytes("87380").unwrap(), 87_380);
        assert_eq!(parse_bytes("256M").unwrap(), 256_000_000);
        assert_eq!(parse_bytes("4Mi").unwrap(), 4_194_304);
        assert_eq!(parse_bytes("16KiB").unwrap(), 16_384);
        assert_eq!(parse_bytes("1.5K").unwrap(), 1500);
        assert!(parse_bytes("1.5").is_err());
        assert!(parse_bytes("12X").is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(parse_count("8000").unwrap(), 8000);
        assert_eq!(parse_count("16K").unwrap(), 16_000);
        assert!(parse_count("1.5").is_err());
    }

    #[test]
    fn display() {
        assert_eq!(display_bits(120_000.0), "120 Kbit");
        assert_eq!(display_bits(8.0), "8 bit");
        assert_eq!(display_rate(949_284_785.4), "949.28 Mbps");
        assert_eq!(display_rate(1e10), "10 Gbps");
    }
}
