//! Timestamp parsing and formatting.
//!
//! Canonical form is `HH:MM:SS` with an optional `.fff` fraction. `MM:SS` is
//! accepted on input, and `[a, b]` denotes a span.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static TIMESTAMP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[^\d:.])(\d{1,3}):(\d{1,2})(?::(\d{1,2}))?(?:\.(\d{1,3}))?(?:$|[^\d:]|:(?:$|[^\d]))")
        .expect("timestamp regex")
});

static SPAN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*([0-9:.]+)\s*,\s*([0-9:.]+)\s*\]").expect("span regex"));

/// Parses `HH:MM:SS(.fff)` or `MM:SS(.fff)`. Minute and second fields must
/// be below 60.
pub fn parse_timestamp(text: &str) -> Result<f64> {
    parse_fields(text.trim(), false)
}

/// Like [`parse_timestamp`] but lets minute and second fields overflow, so
/// `"99:99"` reads as 99 minutes plus 99 seconds. Plain decimal seconds are
/// also accepted.
pub fn parse_timestamp_lenient(text: &str) -> Result<f64> {
    let text = text.trim();
    if let Ok(secs) = text.parse::<f64>() {
        if secs.is_finite() {
            return Ok(secs);
        }
    }
    parse_fields(text, true)
}

fn parse_fields(text: &str, lenient: bool) -> Result<f64> {
    let bad = || Error::invalid(format!("unparseable timestamp {text:?}"));
    let (clock, fraction) = match text.split_once('.') {
        Some((clock, frac)) => (clock, Some(frac)),
        None => (text, None),
    };
    let parts: Vec<&str> = clock.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let mut fields = Vec::with_capacity(3);
    for part in &parts {
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        fields.push(part.parse::<u64>().map_err(|_| bad())?);
    }
    let (h, m, s) = match fields.as_slice() {
        [m, s] => (0, *m, *s),
        [h, m, s] => (*h, *m, *s),
        _ => unreachable!(),
    };
    if !lenient && (s >= 60 || (parts.len() == 3 && m >= 60)) {
        return Err(bad());
    }
    let mut secs = (h * 3600 + m * 60 + s) as f64;
    if let Some(frac) = fraction {
        if frac.is_empty() || frac.len() > 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        secs += frac.parse::<f64>().map_err(|_| bad())? / 10f64.powi(frac.len() as i32);
    }
    Ok(secs)
}

/// Formats seconds as `HH:MM:SS`, adding `.fff` when the value is not a
/// whole number of milliseconds-rounded seconds.
pub fn format_hms(seconds: f64) -> String {
    let millis = (seconds.max(0.0) * 1000.0).round() as u64;
    let (whole, frac) = (millis / 1000, millis % 1000);
    let (h, m, s) = (whole / 3600, (whole / 60) % 60, whole % 60);
    if frac == 0 {
        format!("{h:02}:{m:02}:{s:02}")
    } else {
        format!("{h:02}:{m:02}:{s:02}.{frac:03}")
    }
}

/// A closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("span bounds must be finite"));
        }
        if lo > hi {
            return Err(Error::invalid(format!("inverted span [{lo}, {hi}]")));
        }
        Ok(Span { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_hms(self.lo), format_hms(self.hi))
    }
}

/// A point or a span mentioned in text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeRef {
    Point(f64),
    Span(Span),
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeRef::Point(t) => f.write_str(&format_hms(*t)),
            TimeRef::Span(s) => s.fmt(f),
        }
    }
}

/// Parses a whole string as either `[a, b]` or a single timestamp.
pub fn parse_time_ref(text: &str) -> Result<TimeRef> {
    let text = text.trim();
    if text.starts_with('[') {
        let caps = SPAN
            .captures(text)
            .filter(|c| c.get(0).map(|m| m.as_str().len()) == Some(text.len()))
            .ok_or_else(|| Error::invalid(format!("unparseable span {text:?}")))?;
        let lo = parse_timestamp(&caps[1])?;
        let hi = parse_timestamp(&caps[2])?;
        return Ok(TimeRef::Span(Span::new(lo, hi)?));
    }
    parse_timestamp(text).map(TimeRef::Point)
}

/// Every time reference in `text`, in order of appearance. Spans take
/// precedence over the timestamps inside them.
pub fn find_time_refs(text: &str) -> Vec<TimeRef> {
    let mut found: Vec<(usize, TimeRef)> = Vec::new();
    let mut covered: Vec<(usize, usize)> = Vec::new();
    for caps in SPAN.captures_iter(text) {
        let whole = caps.get(0).expect("match");
        if let (Ok(lo), Ok(hi)) = (parse_timestamp(&caps[1]), parse_timestamp(&caps[2])) {
            if let Ok(span) = Span::new(lo, hi) {
                found.push((whole.start(), TimeRef::Span(span)));
                covered.push((whole.start(), whole.end()));
            }
        }
    }
    for caps in TIMESTAMP.captures_iter(text) {
        let start = caps.get(1).expect("group").start();
        if covered.iter().any(|&(a, b)| start >= a && start < b) {
            continue;
        }
        let end = caps.get(4).or_else(|| caps.get(3)).or_else(|| caps.get(2)).expect("group").end();
        if let Ok(t) = parse_timestamp(&text[start..end]) {
            found.push((start, TimeRef::Point(t)));
        }
    }
    found.sort_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, r)| r).collect()
}

/// The first time reference in `text`, if any.
pub fn first_time_ref(text: &str) -> Option<TimeRef> {
    find_time_refs(text).into_iter().next()
}
