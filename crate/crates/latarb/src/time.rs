//! Minute-resolution timestamps.
//!
//! Everything downstream of ingest works on a uniform UTC minute grid:
//! volatility is per √minute, latency moments are in minutes, and orderbook
//! snapshots are bucketed to the minute. `Minute` wraps minutes since the
//! Unix epoch so grid arithmetic stays integer.

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

pub const MINUTES_PER_DAY: i64 = 1440;

/// One minute on the UTC grid, counted from the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Minute(pub i64);

impl Minute {
    /// Floor a wall-clock instant to its minute bucket.
    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Minute(dt.timestamp().div_euclid(60))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_opt(self.0 * 60, 0).unwrap()
    }

    /// The UTC calendar day this minute falls on.
    pub fn day(self) -> Day {
        Day(self.0.div_euclid(MINUTES_PER_DAY))
    }

    /// Offset within the day, in `0..1440`.
    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }

    /// ISO-8601 with seconds, e.g. `2021-03-01T14:07:00Z`.
    pub fn to_iso(self) -> String {
        self.to_datetime().format("%Y-%m-%dT%H:%M:%SZ").to_string()
    }

    pub fn parse_iso(s: &str) -> Option<Self> {
        DateTime::parse_from_rfc3339(s)
            .ok()
            .map(|dt| Minute::from_datetime(dt.with_timezone(&Utc)))
    }
}

/// One UTC calendar day, counted from the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Day(pub i64);

impl Day {
    pub fn first_minute(self) -> Minute {
        Minute(self.0 * MINUTES_PER_DAY)
    }

    pub fn prev(self) -> Day {
        Day(self.0 - 1)
    }

    pub fn next(self) -> Day {
        Day(self.0 + 1)
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Day(date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp() / 86_400)
    }

    pub fn to_date(self) -> NaiveDate {
        Utc.timestamp_opt(self.0 * 86_400, 0).unwrap().date_naive()
    }

    /// `YYYY-MM-DD`.
    pub fn to_iso(self) -> String {
        self.to_date().format("%Y-%m-%d").to_string()
    }

    pub fn parse_iso(s: &str) -> Option<Self> {
        s.parse::<NaiveDate>().ok().map(Day::from_date)
    }
}

/// Parse a timestamp that is either RFC 3339 or `YYYY-MM-DD HH:MM[:SS]`.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minute_day_roundtrip() {
        let m = Minute::parse_iso("2021-03-01T14:07:13Z").unwrap();
        assert_eq!(m.to_iso(), "2021-03-01T14:07:00Z");
        assert_eq!(m.day().to_iso(), "2021-03-01");
        assert_eq!(m.day().first_minute().minute_of_day(), 0);
        assert_eq!(m.day().next().prev(), m.day());
    }

    #[test]
    fn flexible_timestamp_parse() {
        assert!(parse_timestamp("2021-03-01T14:07:13Z").is_some());
        assert!(parse_timestamp("2021-03-01 14:07:13").is_some());
        assert!(parse_timestamp("2021-03-01 14:07").is_some());
        assert!(parse_timestamp("not a time").is_none());
    }
}
