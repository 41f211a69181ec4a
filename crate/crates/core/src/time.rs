//! Simulated time and transferred volume as exact integers.
//!
//! Files carry decimal seconds and bytes; internally everything is held in
//! milliseconds so that event ordering and volume accounting never drift.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A point in (or span of) simulated time, in milliseconds.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(pub i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(i64::MAX);

    pub fn from_millis(ms: i64) -> Self {
        SimTime(ms)
    }

    pub fn from_secs(s: i64) -> Self {
        SimTime(s * 1000)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Parses a non-negative decimal seconds value with at most millisecond
    /// precision ("10", "10.5", "0.125").
    pub fn parse_secs(text: &str) -> Result<Self, String> {
        parse_milli_decimal(text).map(|v| SimTime(v as i64))
    }

    pub fn saturating_add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    /// Decimal seconds with trailing zeros trimmed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 < 0 {
            write!(f, "-")?;
        }
        write_milli_decimal(f, self.0.unsigned_abs() as u128)
    }
}

/// Time needed to push `size` bytes through a link of `rate` bytes/second,
/// rounded up to the next whole millisecond.
pub fn transmission_time(size: u64, rate: u64) -> SimTime {
    debug_assert!(rate > 0);
    let ms = (size as u128 * 1000).div_ceil(rate as u128);
    SimTime(ms as i64)
}

/// A data volume in millibytes (bytes/second × milliseconds), so that
/// `rate · duration` is always an exact integer.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Volume(pub u128);

impl Volume {
    pub const ZERO: Volume = Volume(0);

    /// Volume carried by a link of `rate` bytes/second over `duration`.
    pub fn of(rate: u64, duration: SimTime) -> Self {
        Volume(rate as u128 * duration.0.max(0) as u128)
    }

    pub fn from_bytes(bytes: u64) -> Self {
        Volume(bytes as u128 * 1000)
    }

    pub fn millibytes(self) -> u128 {
        self.0
    }

    pub fn as_bytes_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn parse_bytes(text: &str) -> Result<Self, String> {
        parse_milli_decimal(text).map(Volume)
    }
}

impl Add for Volume {
    type Output = Volume;
    fn add(self, rhs: Volume) -> Volume {
        Volume(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Volume {
    fn sum<I: Iterator<Item = Volume>>(iter: I) -> Volume {
        iter.fold(Volume::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Volume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_milli_decimal(f, self.0)
    }
}

fn write_milli_decimal(f: &mut fmt::Formatter<'_>, v: u128) -> fmt::Result {
    let whole = v / 1000;
    let frac = v % 1000;
    if frac == 0 {
        write!(f, "{whole}")
    } else {
        let digits = format!("{frac:03}");
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

fn parse_milli_decimal(text: &str) -> Result<u128, String> {
    let bad = || format!("invalid decimal '{text}'");
    let (whole, frac) = match text.split_once('.') {
        Some((w, fr)) => (w, fr),
        None => (text, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let frac = frac.trim_end_matches('0');
    if frac.len() > 3 {
        return Err(format!("'{text}' has sub-millisecond precision"));
    }
    let whole: u128 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| bad())?
    };
    let mut frac_val: u128 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    for _ in frac.len()..3 {
        frac_val *= 10;
    }
    whole
        .checked_mul(1000)
        .and_then(|w| w.checked_add(frac_val))
        .ok_or_else(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_seconds() {
        assert_eq!(SimTime::parse_secs("10").unwrap(), SimTime(10_000));
        assert_eq!(SimTime::parse_secs("10.5").unwrap(), SimTime(10_500));
        assert_eq!(SimTime::parse_secs("0.125").unwrap(), SimTime(125));
        assert_eq!(SimTime::parse_secs(".5").unwrap(), SimTime(500));
        assert_eq!(SimTime::parse_secs("1.2500").unwrap(), SimTime(1250));
        assert!(SimTime::parse_secs("1.0001").is_err());
        assert!(SimTime::parse_secs("-1").is_err());
        assert!(SimTime::parse_secs("abc").is_err());
        assert!(SimTime::parse_secs(".").is_err());
        assert_eq!(SimTime(10_500).to_string(), "10.5");
        assert_eq!(SimTime(10_000).to_string(), "10");
        assert_eq!(SimTime(7).to_string(), "0.007");
    }

    #[test]
    fn transmission_time_rounds_up() {
        assert_eq!(transmission_time(5, 1), SimTime(5000));
        assert_eq!(transmission_time(1, 3), SimTime(334));
        assert_eq!(transmission_time(10, 2), SimTime(5000));
    }

    #[test]
    fn volume_is_exact() {
        let v = Volume::of(3, SimTime(333));
        assert_eq!(v.millibytes(), 999);
        assert_eq!(v.to_string(), "0.999");
        assert_eq!(Volume::parse_bytes("0.999").unwrap(), v);
        assert_eq!(Volume::of(2, SimTime::from_secs(10)).to_string(), "20");
    }
}
