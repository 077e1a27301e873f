use std::fmt;
use std::ops::{Add, AddAssign, Sub};

const MICROS_PER_SEC: u64 = 1_000_000;

/// Simulation clock value with microsecond resolution.
///
/// Stored as an integer so that repeated additions never drift and traces
/// hash identically on every platform. Also used for durations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * MICROS_PER_SEC)
    }

    /// Rounds to the nearest microsecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * MICROS_PER_SEC as f64).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_mul(self, k: u64) -> Option<SimTime> {
        self.0.checked_mul(k).map(SimTime)
    }

    /// Parses the trace rendering (`12.345678`) exactly, without going through f64.
    pub fn parse_secs(s: &str) -> Option<SimTime> {
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, ""),
        };
        if whole.is_empty() || frac.len() > 6 {
            return None;
        }
        if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let whole: u64 = whole.parse().ok()?;
        let mut frac_us: u64 = 0;
        for (i, b) in frac.bytes().enumerate() {
            frac_us += u64::from(b - b'0') * 10u64.pow(5 - i as u32);
        }
        whole.checked_mul(MICROS_PER_SEC)?.checked_add(frac_us).map(SimTime)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

/// Seconds with exactly six decimals, the trace rendering.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / MICROS_PER_SEC, self.0 % MICROS_PER_SEC)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_six_decimals() {
        assert_eq!(SimTime::from_micros(10_250_000).to_string(), "10.250000");
        assert_eq!(SimTime::from_micros(7).to_string(), "0.000007");
    }

    #[test]
    fn parse_is_exact_inverse() {
        for us in [0u64, 1, 999_999, 1_000_000, 300_000_000, 123_456_789] {
            let t = SimTime::from_micros(us);
            assert_eq!(SimTime::parse_secs(&t.to_string()), Some(t));
        }
        assert_eq!(SimTime::parse_secs("2.5"), Some(SimTime::from_micros(2_500_000)));
        assert_eq!(SimTime::parse_secs("3"), Some(SimTime::from_secs(3)));
        assert_eq!(SimTime::parse_secs("1.0000001"), None);
        assert_eq!(SimTime::parse_secs("-1.0"), None);
        assert_eq!(SimTime::parse_secs(".5"), None);
    }

    #[test]
    fn float_conversion_rounds() {
        assert_eq!(SimTime::from_secs_f64(0.0000015), SimTime::from_micros(2));
        assert_eq!(SimTime::from_secs_f64(-3.0), SimTime::ZERO);
        assert_eq!(SimTime::from_secs_f64(300.0).as_secs_f64(), 300.0);
    }
}
