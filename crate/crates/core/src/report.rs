//! Text and JSON renderings of a [`ScanReport`] and the CI exit-code contract.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cvss::Score;
use crate::error::Result;
use crate::pipeline::{Confidence, EvidenceKind, ScanMode, ScanReport, Verdict};

pub const SCHEMA_VERSION: &str = "1";

/// Maximum width of any line in the text rendering.
pub const TEXT_WIDTH: usize = 120;

pub const NO_VULNERABILITIES: &str = "No vulnerabilities found.";

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub format: Format,
    pub body: Vec<u8>,
    pub schema_version: &'static str,
}

impl RenderedReport {
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.body).expect("renderers emit UTF-8")
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: &'static str,
    #[serde(flatten)]
    report: &'a ScanReport,
}

#[derive(Deserialize)]
struct OwnedEnvelope {
    #[allow(dead_code)]
    schema_version: String,
    #[serde(flatten)]
    report: ScanReport,
}

pub fn render(report: &ScanReport, format: Format) -> RenderedReport {
    match format {
        Format::Text => render_text(report),
        Format::Json => render_json(report),
    }
}

pub fn render_json(report: &ScanReport) -> RenderedReport {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        report,
    };
    let mut body = serde_json::to_vec_pretty(&envelope).expect("report serializes");
    body.push(b'\n');
    RenderedReport {
        format: Format::Json,
        body,
        schema_version: SCHEMA_VERSION,
    }
}

/// Inverse of [`render_json`]. Unknown fields are ignored.
pub fn parse_json(body: &[u8]) -> Result<ScanReport> {
    let envelope: OwnedEnvelope = serde_json::from_slice(body)?;
    Ok(envelope.report)
}

fn wrapped(out: &mut String, text: &str, indent: &str) {
    let continuation = format!("{indent}  ");
    let options = textwrap::Options::new(TEXT_WIDTH)
        .initial_indent(indent)
        .subsequent_indent(&continuation);
    for line in textwrap::wrap(text, options) {
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

fn kind_label(kind: EvidenceKind) -> &'static str {
    match kind {
        EvidenceKind::DependencyVersion => "dependency version",
        EvidenceKind::PatternHit => "class reference",
        EvidenceKind::ConfigReference => "configuration reference",
    }
}

pub fn render_text(report: &ScanReport) -> RenderedReport {
    let mut out = String::new();
    wrapped(&mut out, &format!("log4shield {} scan report", report.tool_version), "");
    wrapped(&mut out, &format!("root: {}", report.root), "");
    let verdict = match report.verdict {
        Verdict::Vulnerable => "VULNERABLE",
        Verdict::NotVulnerable => "NOT VULNERABLE",
    };
    wrapped(&mut out, &format!("verdict: {verdict}"), "");
    let mode = match report.mode_reached {
        ScanMode::InitialOnly => "initial scan only",
        ScanMode::DeepScan => "deep scan",
    };
    wrapped(&mut out, &format!("mode: {mode}"), "");
    wrapped(
        &mut out,
        &format!(
            "files scanned: {}, dependencies seen: {}, findings: {}, warnings: {}",
            report.files_scanned,
            report.dependencies_seen.len(),
            report.findings.len(),
            report.warnings.len()
        ),
        "",
    );
    out.push('\n');

    if report.findings.is_empty() {
        wrapped(&mut out, NO_VULNERABILITIES, "");
    }

    for (i, f) in report.findings.iter().enumerate() {
        let mut heading = format!("[{}] {}  score {}  {}", i + 1, f.cve_id, f.base_score, f.severity_band);
        if f.confidence == Confidence::VersionOnly {
            heading.push_str("  (version-only: no usage of the class detected)");
        }
        wrapped(&mut out, &heading, "");
        wrapped(&mut out, &f.affected_versions_note, "    ");
        if !f.found_versions.is_empty() {
            wrapped(&mut out, &format!("found: {}", f.found_versions.join(", ")), "    ");
        }
        wrapped(&mut out, "evidence:", "    ");
        for e in &f.evidence {
            let mut line = format!("{}:{}  {}", e.file, e.line, kind_label(e.kind));
            if !e.detail.is_empty() {
                let _ = write!(line, "  {}", e.detail);
            }
            wrapped(&mut out, &line, "      ");
        }
        wrapped(&mut out, "recommendation:", "    ");
        wrapped(&mut out, &f.recommendation, "      ");
        out.push('\n');
    }

    if !report.warnings.is_empty() {
        if !report.findings.is_empty() || out.ends_with(".\n") {
            out.push('\n');
        }
        wrapped(&mut out, "warnings:", "");
        for w in &report.warnings {
            wrapped(&mut out, w, "  ");
        }
    }

    RenderedReport {
        format: Format::Text,
        body: out.into_bytes(),
        schema_version: SCHEMA_VERSION,
    }
}

/// `1` when any finding scores at or above `threshold`, else `0`.
/// [`EXIT_ERROR`] is left to callers that hit a scan error.
pub fn exit_code(report: &ScanReport, threshold: Score) -> i32 {
    if report.findings.iter().any(|f| f.base_score >= threshold) {
        EXIT_FINDINGS
    } else {
        EXIT_CLEAN
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Evidence, Finding};
    use chrono::{DateTime, Utc};

    fn report(findings: Vec<Finding>) -> ScanReport {
        ScanReport {
            root: "fixtures/x".into(),
            verdict: if findings.is_empty() {
                Verdict::NotVulnerable
            } else {
                Verdict::Vulnerable
            },
            mode_reached: ScanMode::DeepScan,
            findings,
            dependencies_seen: vec![],
            files_scanned: 3,
            warnings: vec![],
            started: DateTime::<Utc>::UNIX_EPOCH,
            finished: DateTime::<Utc>::UNIX_EPOCH,
            tool_version: "0.0.0".into(),
        }
    }

    fn finding(id: &str, tenths: u8) -> Finding {
        let score = Score::from_tenths(tenths).unwrap();
        Finding {
            cve_id: id.into(),
            base_score: score,
            severity_band: score.band(),
            confidence: Confidence::Confirmed,
            evidence: vec![Evidence {
                file: "pom.xml".into(),
                line: 12,
                kind: EvidenceKind::DependencyVersion,
                detail: "org.apache.logging.log4j:log4j-core 2.14.1".into(),
            }],
            affected_versions_note: "affects Log4j 2.0-beta9 to 2.14.1".into(),
            found_versions: vec!["log4j-core 2.14.1".into()],
            recommendation: "Upgrade. ".repeat(40),
        }
    }

    #[test]
    fn text_contains_cve_score_and_path() {
        let body = render_text(&report(vec![finding("CVE-2021-44228", 100)]))
            .as_str()
            .to_string();
        let line = body.lines().find(|l| l.contains("CVE-2021-44228")).unwrap();
        assert!(line.contains("10.0"));
        assert!(body.contains("pom.xml:12"));
        assert!(body.lines().all(|l| l.len() <= TEXT_WIDTH));
    }

    #[test]
    fn empty_text_report() {
        let body = render_text(&report(vec![])).as_str().to_string();
        assert!(body.contains(NO_VULNERABILITIES));
    }

    #[test]
    fn text_keeps_ranked_order() {
        let body = render_text(&report(vec![
            finding("CVE-2021-44228", 100),
            finding("CVE-2021-44832", 66),
        ]))
        .as_str()
        .to_string();
        assert!(body.find("CVE-2021-44228").unwrap() < body.find("CVE-2021-44832").unwrap());
    }

    #[test]
    fn long_paths_are_wrapped() {
        let mut f = finding("CVE-2021-44228", 100);
        f.evidence[0].file = "a/".repeat(100);
        let body = render_text(&report(vec![f])).as_str().to_string();
        assert!(body.lines().all(|l| l.len() <= TEXT_WIDTH));
    }

    #[test]
    fn json_shape() {
        let empty: serde_json::Value = serde_json::from_slice(&render_json(&report(vec![])).body).unwrap();
        assert_eq!(empty["verdict"], "not_vulnerable");
        assert_eq!(empty["schema_version"], SCHEMA_VERSION);
        assert_eq!(empty["findings"].as_array().unwrap().len(), 0);
        assert_eq!(empty["started"], "1970-01-01T00:00:00Z");

        let one: serde_json::Value =
            serde_json::from_slice(&render_json(&report(vec![finding("CVE-2021-44228", 100)])).body).unwrap();
        let f = &one["findings"][0];
        assert_eq!(f["cve_id"], "CVE-2021-44228");
        assert_eq!(f["base_score"], 10.0);
        assert_eq!(f["evidence"].as_array().unwrap().len(), 1);
        assert!(f["recommendation"].is_string());
    }

    #[test]
    fn json_round_trip() {
        let r = report(vec![finding("CVE-2021-44228", 100), finding("CVE-2021-44832", 66)]);
        assert_eq!(parse_json(&render_json(&r).body).unwrap(), r);
    }

    #[test]
    fn json_tolerates_unknown_fields() {
        let mut v: serde_json::Value = serde_json::from_slice(&render_json(&report(vec![])).body).unwrap();
        v["future_field"] = serde_json::json!({"x": 1});
        let body = serde_json::to_vec(&v).unwrap();
        assert_eq!(parse_json(&body).unwrap(), report(vec![]));
    }

    #[test]
    fn exit_codes() {
        let t = |x| Score::from_tenths(x).unwrap();
        assert_eq!(exit_code(&report(vec![]), t(0)), 0);
        assert_eq!(exit_code(&report(vec![finding("CVE-2021-44228", 100)]), t(90)), 1);
        assert_eq!(exit_code(&report(vec![finding("CVE-2021-44832", 66)]), t(90)), 0);
        assert_eq!(exit_code(&report(vec![finding("CVE-2021-44832", 66)]), t(66)), 1);
    }
}
