//! CVSS base scores.
//!
//! Scores are kept as whole tenths so that ranking and threshold comparisons
//! are exact. [`compute_base_score`] accepts any floating-point scalar.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A CVSS score in `[0.0, 10.0]` with one decimal digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Score(u8);

impl Score {
    pub const MAX: Score = Score(100);
    pub const ZERO: Score = Score(0);

    pub const fn from_tenths(tenths: u8) -> Option<Score> {
        if tenths <= 100 {
            Some(Score(tenths))
        } else {
            None
        }
    }

    pub const fn tenths(self) -> u8 {
        self.0
    }

    /// Accepts values that are already on the one-decimal grid.
    pub fn from_f64(value: f64) -> Option<Score> {
        if !value.is_finite() || !(0.0..=10.0).contains(&value) {
            return None;
        }
        let scaled = value * 10.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-6 {
            return None;
        }
        Score::from_tenths(rounded as u8)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    pub fn band(self) -> SeverityBand {
        SeverityBand::of(self)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl FromStr for Score {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
        Score::from_f64(value).ok_or_else(|| format!("`{s}` is not a one-decimal score in [0, 10]"))
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Score::from_f64(value).ok_or_else(|| serde::de::Error::custom(format!("invalid score {value}")))
    }
}

/// Qualitative CVSS v3 band. Presentation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityBand {
    Low,
    Medium,
    High,
    Critical,
}

impl SeverityBand {
    pub fn of(score: Score) -> SeverityBand {
        match score.tenths() {
            90.. => SeverityBand::Critical,
            70..=89 => SeverityBand::High,
            40..=69 => SeverityBand::Medium,
            _ => SeverityBand::Low,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SeverityBand::Critical => "Critical",
            SeverityBand::High => "High",
            SeverityBand::Medium => "Medium",
            SeverityBand::Low => "Low",
        }
    }
}

impl fmt::Display for SeverityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvssInputs<T> {
    pub impact: T,
    pub exploitability: T,
}

impl<T: Float> CvssInputs<T> {
    pub fn new(impact: T, exploitability: T) -> Self {
        CvssInputs { impact, exploitability }
    }
}

/// `impact + exploitability`, rounded up to one decimal and capped at 10.0.
///
/// Rounding goes through a fixed-point integer at 1e-5 resolution, the same
/// technique CVSS v3.1 uses, so `5.9 + 3.9` lands on 9.8 rather than 9.9.
pub fn compute_base_score<T: Float>(inputs: CvssInputs<T>) -> Result<Score> {
    let CvssInputs { impact, exploitability } = inputs;
    let zero = T::zero();
    if !impact.is_finite() || !exploitability.is_finite() || impact < zero || exploitability < zero {
        return Err(Error::NegativeInput);
    }
    let sum = impact + exploitability;
    let ten = T::from(10.0).ok_or(Error::NegativeInput)?;
    if sum >= ten {
        return Ok(Score::MAX);
    }
    let scale = T::from(100_000.0).ok_or(Error::NegativeInput)?;
    let fixed = (sum * scale).round().to_u64().ok_or(Error::NegativeInput)?;
    let tenths = if fixed % 10_000 == 0 {
        fixed / 10_000
    } else {
        fixed / 10_000 + 1
    };
    Ok(Score::from_tenths(tenths.min(100) as u8).unwrap_or(Score::MAX))
}
