//! SI quantity parsing for config files.
//!
//! Config files carry physical quantities as strings like `"0.02ns"`,
//! `"0.1fJ"`, `"52.6GHz"`, `"28MB"` or `"300GB/s"`. Everything is stored
//! internally in base SI units (seconds, joules, watts, hertz, meters,
//! bytes). Byte quantities use binary prefixes (KB = 1024).

use crate::error::{Error, Result};

/// Multiplier for a metric prefix character.
fn prefix_factor(p: char) -> Option<f64> {
    Some(match p {
        'a' => 1e-18,
        'f' => 1e-15,
        'p' => 1e-12,
        'n' => 1e-9,
        'u' | 'µ' => 1e-6,
        'm' => 1e-3,
        'k' => 1e3,
        'M' => 1e6,
        'G' => 1e9,
        'T' => 1e12,
        'P' => 1e15,
        _ => return None,
    })
}

fn parse_err(input: &str, reason: &str) -> Error {
    Error::UnitParse {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}

/// Splits "12.5ns" into (12.5, "ns"). Whitespace between number and unit is
/// tolerated.
fn split_number(input: &str) -> Result<(f64, &str)> {
    let s = input.trim();
    let end = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E'))
        .unwrap_or(s.len());
    // An exponent 'e'/'E' must be followed by a digit or sign; "2e" in "2eV"
    // would otherwise swallow the unit. Back off if the tail starts mid-number.
    let (num, unit) = s.split_at(end);
    let value: f64 = num
        .parse()
        .map_err(|_| parse_err(input, "no leading number"))?;
    Ok((value, unit.trim()))
}

/// Parses a quantity with the given base unit symbol, e.g.
/// `parse_quantity("3.5ps", "s")` → 3.5e-12.
/// A bare number (no unit suffix) is taken to already be in base units.
pub fn parse_quantity(input: &str, base_unit: &str) -> Result<f64> {
    let (value, unit) = split_number(input)?;
    if unit.is_empty() || unit == base_unit {
        return Ok(value);
    }
    let mut chars = unit.chars();
    let first = chars.next().unwrap();
    let rest: String = chars.collect();
    if rest == base_unit {
        if let Some(f) = prefix_factor(first) {
            return Ok(value * f);
        }
    }
    Err(parse_err(
        input,
        &format!("expected unit '{base_unit}' with optional SI prefix"),
    ))
}

pub fn parse_seconds(input: &str) -> Result<f64> {
    parse_quantity(input, "s")
}

pub fn parse_joules(input: &str) -> Result<f64> {
    parse_quantity(input, "J")
}

pub fn parse_watts(input: &str) -> Result<f64> {
    parse_quantity(input, "W")
}

pub fn parse_hertz(input: &str) -> Result<f64> {
    parse_quantity(input, "Hz")
}

pub fn parse_meters(input: &str) -> Result<f64> {
    parse_quantity(input, "m")
}

/// Bytes use binary prefixes: "32KB" = 32·1024, "28MB" = 28·2^20.
/// "B" alone or a bare number is bytes.
pub fn parse_bytes(input: &str) -> Result<u64> {
    let (value, unit) = split_number(input)?;
    let factor = match unit {
        "" | "B" => 1.0,
        "KB" | "kB" | "KiB" => 1024.0,
        "MB" | "MiB" => 1024.0 * 1024.0,
        "GB" | "GiB" => 1024.0 * 1024.0 * 1024.0,
        _ => return Err(parse_err(input, "expected B/KB/MB/GB")),
    };
    let bytes = value * factor;
    if bytes < 0.0 || bytes.fract() != 0.0 {
        return Err(parse_err(input, "byte count must be a non-negative integer"));
    }
    Ok(bytes as u64)
}

/// Bandwidth in bytes per second; decimal prefixes ("300GB/s" = 3e11).
pub fn parse_bytes_per_second(input: &str) -> Result<f64> {
    let (value, unit) = split_number(input)?;
    let factor = match unit {
        "B/s" => 1.0,
        "kB/s" | "KB/s" => 1e3,
        "MB/s" => 1e6,
        "GB/s" => 1e9,
        "TB/s" => 1e12,
        _ => return Err(parse_err(input, "expected B/s with optional prefix")),
    };
    Ok(value * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn seconds_with_prefixes() {
        close(parse_seconds("0.02ns").unwrap(), 0.02e-9);
        close(parse_seconds("3.5ps").unwrap(), 3.5e-12);
        close(parse_seconds("100ns").unwrap(), 100e-9);
        close(parse_seconds("1s").unwrap(), 1.0);
        close(parse_seconds("2.5e-9 s").unwrap(), 2.5e-9);
        close(parse_seconds("42").unwrap(), 42.0);
    }

    #[test]
    fn energies_and_powers() {
        close(parse_joules("0.1fJ").unwrap(), 0.1e-15);
        close(parse_joules("8pJ").unwrap(), 8e-12);
        close(parse_watts("0.874uW").unwrap(), 0.874e-6);
        close(parse_watts("102mW").unwrap(), 0.102);
        close(parse_watts("13nW").unwrap(), 13e-9);
    }

    #[test]
    fn frequencies_and_lengths() {
        close(parse_hertz("52.6GHz").unwrap(), 52.6e9);
        close(parse_meters("28nm").unwrap(), 28e-9);
        close(parse_meters("2um").unwrap(), 2e-6);
    }

    #[test]
    fn bytes_binary_prefixes() {
        assert_eq!(parse_bytes("32KB").unwrap(), 32 * 1024);
        assert_eq!(parse_bytes("28MB").unwrap(), 28 * 1024 * 1024);
        assert_eq!(parse_bytes("128").unwrap(), 128);
        assert_eq!(parse_bytes_per_second("300GB/s").unwrap(), 3e11);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_seconds("fast").is_err());
        assert!(parse_seconds("3xs").is_err());
        assert_eq!(parse_bytes("1.5KB").unwrap(), 1536);
        assert!(parse_bytes("0.3B").is_err());
        assert!(parse_bytes("-4MB").is_err());
    }
}
