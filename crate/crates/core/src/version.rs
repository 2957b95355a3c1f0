//! Log4j version strings: parsing, ordering and vulnerability classification.
//!
//! Only literal versions are understood (`1.2.17`, `2.0-beta9`, `2.17.1`).
//! Maven range expressions such as `[2.0,2.15)` are rejected so callers can
//! treat the dependency as having an undetermined version.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Pre-release qualifier. Orders `alpha < beta < rc`, all before the release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Qualifier {
    Alpha(u32),
    Beta(u32),
    Rc(u32),
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qualifier::Alpha(n) => write!(f, "alpha{n}"),
            Qualifier::Beta(n) => write!(f, "beta{n}"),
            Qualifier::Rc(n) => write!(f, "rc{n}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Log4jVersion {
    pub major: u32,
    pub minor: u32,
    pub patch: u32,
    pub qualifier: Option<Qualifier>,
    raw: String,
}

impl Log4jVersion {
    pub const fn new(major: u32, minor: u32, patch: u32) -> Self {
        Log4jVersion {
            major,
            minor,
            patch,
            qualifier: None,
            raw: String::new(),
        }
    }

    pub fn with_qualifier(mut self, qualifier: Qualifier) -> Self {
        self.qualifier = Some(qualifier);
        self
    }

    /// The text this version was parsed from, or the canonical form if it
    /// was constructed directly.
    pub fn raw(&self) -> String {
        if self.raw.is_empty() {
            self.to_string()
        } else {
            self.raw.clone()
        }
    }

    fn key(&self) -> (u32, u32, u32, QualifierKey) {
        (self.major, self.minor, self.patch, QualifierKey(self.qualifier))
    }
}

/// `None` (a release) sorts after every qualifier.
#[derive(PartialEq, Eq)]
struct QualifierKey(Option<Qualifier>);

impl PartialOrd for QualifierKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QualifierKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0, other.0) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(a), Some(b)) => a.cmp(&b),
        }
    }
}

impl PartialEq for Log4jVersion {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Log4jVersion {}

impl Hash for Log4jVersion {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (self.major, self.minor, self.patch, self.qualifier).hash(state);
    }
}

impl PartialOrd for Log4jVersion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Log4jVersion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for Log4jVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        if let Some(q) = self.qualifier {
            write!(f, "-{q}")?;
        }
        Ok(())
    }
}

impl FromStr for Log4jVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_version(s)
    }
}

impl Serialize for Log4jVersion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw())
    }
}

impl<'de> Deserialize<'de> for Log4jVersion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_version(&text).map_err(serde::de::Error::custom)
    }
}

pub fn parse_version(text: &str) -> Result<Log4jVersion> {
    let malformed = || Error::MalformedVersion(text.to_string());
    let trimmed = text.trim();
    if trimmed.is_empty() || !trimmed.starts_with(|c: char| c.is_ascii_digit()) {
        return Err(malformed());
    }

    let split = trimmed
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(trimmed.len());
    let (numeric, rest) = trimmed.split_at(split);

    // A trailing dot belongs to the qualifier separator, as in `2.0.beta9`.
    let (numeric, rest) = match numeric.strip_suffix('.') {
        Some(n) if !rest.is_empty() => (n, rest),
        _ => (numeric, rest),
    };

    let mut parts = Vec::with_capacity(3);
    for piece in numeric.split('.') {
        if piece.is_empty() {
            return Err(malformed());
        }
        parts.push(piece.parse::<u32>().map_err(|_| malformed())?);
    }
    if parts.len() > 3 {
        return Err(malformed());
    }

    let qualifier = if rest.is_empty() {
        None
    } else {
        Some(parse_qualifier(rest).ok_or_else(malformed)?)
    };

    Ok(Log4jVersion {
        major: parts[0],
        minor: parts.get(1).copied().unwrap_or(0),
        patch: parts.get(2).copied().unwrap_or(0),
        qualifier,
        raw: trimmed.to_string(),
    })
}

fn parse_qualifier(text: &str) -> Option<Qualifier> {
    let text = text.strip_prefix(['-', '.']).unwrap_or(text);
    let lower = text.to_ascii_lowercase();
    let (ctor, tail): (fn(u32) -> Qualifier, &str) = if let Some(t) = lower.strip_prefix("alpha") {
        (Qualifier::Alpha, t)
    } else if let Some(t) = lower.strip_prefix("beta") {
        (Qualifier::Beta, t)
    } else {
        let t = lower.strip_prefix("rc")?;
        (Qualifier::Rc, t)
    };
    let tail = tail.strip_prefix(['-', '.']).unwrap_or(tail);
    if tail.is_empty() {
        return Some(ctor(0));
    }
    if !tail.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tail.parse().ok().map(ctor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnClass {
    V1Vulnerable,
    V2Vulnerable,
    NotVulnerable,
}

impl VulnClass {
    pub fn is_vulnerable(self) -> bool {
        !matches!(self, VulnClass::NotVulnerable)
    }
}

/// First 2.x release that carries no known CVE.
pub const V2_SAFE_FLOOR: Log4jVersion = Log4jVersion::new(2, 17, 1);

/// Backport releases inside the vulnerable 2.x span that are treated as patched.
pub const PATCHED_BACKPORTS: [Log4jVersion; 4] = [
    Log4jVersion::new(2, 3, 1),
    Log4jVersion::new(2, 3, 2),
    Log4jVersion::new(2, 12, 3),
    Log4jVersion::new(2, 12, 4),
];

/// Aggregate triage class of a version. Per-CVE applicability lives in the
/// knowledge base ranges.
pub fn classify_version(v: &Log4jVersion) -> VulnClass {
    match v.major {
        1 => VulnClass::V1Vulnerable,
        2 if *v < V2_SAFE_FLOOR && !PATCHED_BACKPORTS.contains(v) => VulnClass::V2Vulnerable,
        _ => VulnClass::NotVulnerable,
    }
}

/// Inclusive version span with point exclusions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRange {
    low: Log4jVersion,
    high: Log4jVersion,
    #[serde(default)]
    exclusions: BTreeSet<Log4jVersion>,
}

impl VersionRange {
    pub fn new(
        low: Log4jVersion,
        high: Log4jVersion,
        exclusions: impl IntoIterator<Item = Log4jVersion>,
    ) -> std::result::Result<Self, String> {
        if low > high {
            return Err(format!("range low {low} exceeds high {high}"));
        }
        let exclusions: BTreeSet<_> = exclusions.into_iter().collect();
        if let Some(outside) = exclusions.iter().find(|e| **e < low || **e > high) {
            return Err(format!("exclusion {outside} lies outside [{low}, {high}]"));
        }
        Ok(VersionRange { low, high, exclusions })
    }

    pub fn low(&self) -> &Log4jVersion {
        &self.low
    }

    pub fn high(&self) -> &Log4jVersion {
        &self.high
    }

    pub fn exclusions(&self) -> &BTreeSet<Log4jVersion> {
        &self.exclusions
    }

    pub fn contains(&self, v: &Log4jVersion) -> bool {
        version_in_range(v, self)
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} to {}", self.low.raw(), self.high.raw())?;
        if !self.exclusions.is_empty() {
            let excl: Vec<_> = self.exclusions.iter().map(|v| v.raw()).collect();
            write!(f, " except {}", excl.join(", "))?;
        }
        Ok(())
    }
}

pub fn version_in_range(v: &Log4jVersion, r: &VersionRange) -> bool {
    r.low <= *v && *v <= r.high && !r.exclusions.contains(v)
}
