//! Static scanner for exploitable Log4j usage in Maven projects.
//!
//! A scan first reads every `pom.xml` for declared Log4j versions. When a
//! vulnerable or undetermined version turns up, or no pom can be read, the
//! whole tree is searched for references to known-dangerous Log4j classes.
//! Findings are enriched from an embedded CVE knowledge base and ranked by
//! CVSS base score.

pub mod cli;
pub mod cvss;
pub mod deep_scan;
pub mod error;
pub mod eval;
pub mod kb;
pub mod pipeline;
pub mod pom;
pub mod report;
pub mod version;
pub mod walk;

pub use cvss::{compute_base_score, CvssInputs, Score, SeverityBand};
pub use error::{Error, Result};
pub use kb::{CveRecord, KnowledgeBase, PatternId, PatternRule};
pub use pipeline::{run_scan, Finding, ScanConfig, ScanMode, ScanReport, Verdict};
pub use version::{classify_version, parse_version, version_in_range, Log4jVersion, VersionRange, VulnClass};

/// CVSS inputs in double precision.
pub type CvssInputsF64 = CvssInputs<f64>;
/// CVSS inputs in single precision.
pub type CvssInputsF32 = CvssInputs<f32>;
