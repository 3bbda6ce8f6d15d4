//! Unit-suffixed quantity literals.
//!
//! Everything inside the crate is strict SI: bytes, bytes/s, seconds, FLOP
//! and FLOP/s. Literals such as `0.5GB`, `25Gbps`, `34TF` or `16ms` are
//! converted here and nowhere else.
//!
//! Suffixes are case-sensitive so that `B` (byte) and `b` (bit) never mix:
//!
//! | dimension   | suffixes                                              |
//! |-------------|-------------------------------------------------------|
//! | bytes       | `B KB MB GB TB` (10^3k), `KiB MiB GiB TiB` (2^10k)    |
//! | bytes/s     | `bps Kbps Mbps Gbps Tbps`, `Bps KBps MBps GBps TBps`, `GB/s` style |
//! | FLOP/s      | `FLOPS MF GF TF PF`, `GFLOPS TFLOPS PFLOPS`           |
//! | FLOP        | `FLOP KFLOP MFLOP GFLOP TFLOP PFLOP`                  |
//! | seconds     | `us ms s min h`                                       |
//!
//! A bare number is dimensionless.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Bytes,
    ByteRate,
    FlopRate,
    Flop,
    Seconds,
    Scalar,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Bytes => "bytes",
            Dimension::ByteRate => "bytes/s",
            Dimension::FlopRate => "FLOP/s",
            Dimension::Flop => "FLOP",
            Dimension::Seconds => "seconds",
            Dimension::Scalar => "dimensionless",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    /// Value in the SI base unit of `dim`.
    pub value: f64,
    pub dim: Dimension,
}

impl Quantity {
    /// Returns the SI value if the literal carried the requested dimension.
    pub fn expect(self, dim: Dimension) -> Result<f64> {
        if self.dim == dim {
            Ok(self.value)
        } else {
            Err(Error::Quantity {
                input: format!("{}", self.value),
                reason: format!("expected {dim}, got {}", self.dim),
            })
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

fn unit(suffix: &str) -> Option<(f64, Dimension)> {
    use Dimension::*;
    const KI: f64 = 1024.0;
    let u = match suffix {
        "" => (1.0, Scalar),

        "B" => (1.0, Bytes),
        "KB" => (1e3, Bytes),
        "MB" => (1e6, Bytes),
        "GB" => (1e9, Bytes),
        "TB" => (1e12, Bytes),
        "KiB" => (KI, Bytes),
        "MiB" => (KI * KI, Bytes),
        "GiB" => (KI * KI * KI, Bytes),
        "TiB" => (KI * KI * KI * KI, Bytes),

        "bps" => (1.0 / 8.0, ByteRate),
        "Kbps" => (1e3 / 8.0, ByteRate),
        "Mbps" => (1e6 / 8.0, ByteRate),
        "Gbps" => (1e9 / 8.0, ByteRate),
        "Tbps" => (1e12 / 8.0, ByteRate),
        "Bps" | "B/s" => (1.0, ByteRate),
        "KBps" | "KB/s" => (1e3, ByteRate),
        "MBps" | "MB/s" => (1e6, ByteRate),
        "GBps" | "GB/s" => (1e9, ByteRate),
        "TBps" | "TB/s" => (1e12, ByteRate),

        "FLOPS" => (1.0, FlopRate),
        "MF" => (1e6, FlopRate),
        "GF" | "GFLOPS" => (1e9, FlopRate),
        "TF" | "TFLOPS" => (1e12, FlopRate),
        "PF" | "PFLOPS" => (1e15, FlopRate),

        "FLOP" => (1.0, Flop),
        "KFLOP" => (1e3, Flop),
        "MFLOP" => (1e6, Flop),
        "GFLOP" => (1e9, Flop),
        "TFLOP" => (1e12, Flop),
        "PFLOP" => (1e15, Flop),

        "us" => (1e-6, Seconds),
        "ms" => (1e-3, Seconds),
        "s" => (1.0, Seconds),
        "min" => (60.0, Seconds),
        "h" => (3600.0, Seconds),
        _ => return None,
    };
    Some(u)
}

/// Length of the leading decimal literal (sign, digits, point, exponent).
fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

pub fn parse(input: &str) -> Result<Quantity> {
    let s = input.trim();
    let err = |reason: &str| Error::Quantity {
        input: input.to_string(),
        reason: reason.to_string(),
    };
    let n = number_len(s);
    if n == 0 {
        return Err(err("missing number"));
    }
    let value: f64 = s[..n].parse().map_err(|_| err("malformed number"))?;
    if !value.is_finite() {
        return Err(err("not finite"));
    }
    let suffix = s[n..].trim_start();
    let (scale, dim) = unit(suffix).ok_or_else(|| err("unknown unit suffix"))?;
    Ok(Quantity {
        value: value * scale,
        dim,
    })
}

/// Parses a literal and requires a dimension.
pub fn parse_as(input: &str, dim: Dimension) -> Result<f64> {
    let q = parse(input)?;
    if q.dim == dim {
        Ok(q.value)
    } else {
        Err(Error::Quantity {
            input: input.to_string(),
            reason: format!("expected {dim}, got {}", q.dim),
        })
    }
}

pub fn bytes(input: &str) -> Result<f64> {
    parse_as(input, Dimension::Bytes)
}

pub fn byte_rate(input: &str) -> Result<f64> {
    parse_as(input, Dimension::ByteRate)
}

pub fn seconds(input: &str) -> Result<f64> {
    parse_as(input, Dimension::Seconds)
}

pub fn flop_rate(input: &str) -> Result<f64> {
    parse_as(input, Dimension::FlopRate)
}

pub fn flop(input: &str) -> Result<f64> {
    parse_as(input, Dimension::Flop)
}

pub fn scalar(input: &str) -> Result<f64> {
    parse_as(input, Dimension::Scalar)
}

/// Parses a comma-separated list of durations, e.g. `1s,10s,60s`.
pub fn seconds_list(input: &str) -> Result<Vec<f64>> {
    input.split(',').map(|p| seconds(p.trim())).collect()
}

/// Serde helpers accepting either an SI number or a quantity literal string.
pub mod de {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer};

    use super::{parse, Dimension, Quantity};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    fn with_dim<'de, D: Deserializer<'de>>(d: D, dim: Dimension) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) => {
                let q = parse(&s).map_err(D::Error::custom)?;
                if q.dim == dim || q.dim == Dimension::Scalar {
                    Ok(q.value)
                } else {
                    Err(D::Error::custom(format!(
                        "{s:?}: expected {dim}, got {}",
                        q.dim
                    )))
                }
            }
        }
    }

    pub fn byte_rate<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        with_dim(d, Dimension::ByteRate)
    }

    pub fn seconds<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        with_dim(d, Dimension::Seconds)
    }

    pub fn flop_rate<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        with_dim(d, Dimension::FlopRate)
    }

    pub fn opt_flop_rate<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        flop_rate(d).map(Some)
    }

    /// Compute demand: FLOP/s or a FLOP count. Bare numbers are FLOP/s.
    pub fn compute<'de, D: Deserializer<'de>>(d: D) -> Result<Quantity, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Quantity {
                value: v,
                dim: Dimension::FlopRate,
            }),
            Raw::Text(s) => {
                let q = parse(&s).map_err(D::Error::custom)?;
                match q.dim {
                    Dimension::FlopRate | Dimension::Flop => Ok(q),
                    Dimension::Scalar => Ok(Quantity {
                        value: q.value,
                        dim: Dimension::FlopRate,
                    }),
                    other => Err(D::Error::custom(format!(
                        "{s:?}: expected FLOP/s or FLOP, got {other}"
                    ))),
                }
            }
        }
    }
}
