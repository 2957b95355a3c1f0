//! Scan orchestration: initial pom scan, conditional deep scan, CVE
//! enrichment and ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvss::{Score, SeverityBand};
use crate::deep_scan::{deep_scan, detect_misconfiguration, HitForm, PatternHit};
use crate::error::{Error, Result};
use crate::kb::{CveRecord, KnowledgeBase};
use crate::pom::{discover_poms, scan_pom_with, DependencyDecl, InitialScanResult, PomOptions};
use crate::version::{classify_version, Log4jVersion};
use crate::walk::{relative_slash, ScanFilter};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotVulnerable,
    Vulnerable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::NotVulnerable => "not_vulnerable",
            Verdict::Vulnerable => "vulnerable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    InitialOnly,
    DeepScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    DependencyVersion,
    PatternHit,
    ConfigReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub file: String,
    pub line: usize,
    pub kind: EvidenceKind,
    /// Dependency coordinates and version, or the matched text.
    pub detail: String,
}

impl Evidence {
    fn key(&self) -> (&str, usize, EvidenceKind) {
        (&self.file, self.line, self.kind)
    }
}

/// How strongly the evidence ties a CVE to the project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    /// A class-specific 1.x CVE inferred from the version alone.
    VersionOnly,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub cve_id: String,
    pub base_score: Score,
    pub severity_band: SeverityBand,
    pub confidence: Confidence,
    pub evidence: Vec<Evidence>,
    pub affected_versions_note: String,
    /// Log4j versions detected in poms that fall in the affected range.
    #[serde(default)]
    pub found_versions: Vec<String>,
    pub recommendation: String,
}

impl Finding {
    fn from_record(record: &CveRecord, confidence: Confidence, evidence: Vec<Evidence>) -> Finding {
        Finding {
            cve_id: record.id.clone(),
            base_score: record.base_score,
            severity_band: record.base_score.band(),
            confidence,
            evidence,
            affected_versions_note: record.affected_note(),
            found_versions: Vec::new(),
            recommendation: record.recommendation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub root: String,
    pub verdict: Verdict,
    pub mode_reached: ScanMode,
    pub findings: Vec<Finding>,
    pub dependencies_seen: Vec<DependencyDecl>,
    pub files_scanned: usize,
    pub warnings: Vec<String>,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub tool_version: String,
}

impl ScanReport {
    /// Clears run-specific timestamps so two reports can be compared.
    pub fn without_timestamps(mut self) -> ScanReport {
        self.started = DateTime::<Utc>::UNIX_EPOCH;
        self.finished = DateTime::<Utc>::UNIX_EPOCH;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Drop class-specific 1.x CVEs that are backed by a version match only.
    pub strict: bool,
    pub threshold: Score,
    pub filter: ScanFilter,
    pub pom: PomOptions,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            strict: false,
            threshold: Score::ZERO,
            filter: ScanFilter::default(),
            pom: PomOptions::default(),
        }
    }
}

/// Score descending, CVE id ascending. Stable.
pub fn rank_findings(mut findings: Vec<Finding>) -> Vec<Finding> {
    findings.sort_by(|a, b| b.base_score.cmp(&a.base_score).then_with(|| a.cve_id.cmp(&b.cve_id)));
    findings
}

/// Collapses findings to one per CVE, unioning their evidence.
pub fn merge_evidence(version_findings: Vec<Finding>, pattern_findings: Vec<Finding>) -> Vec<Finding> {
    let mut merged: BTreeMap<String, Finding> = BTreeMap::new();
    for finding in version_findings.into_iter().chain(pattern_findings) {
        match merged.get_mut(&finding.cve_id) {
            Some(existing) => {
                existing.confidence = existing.confidence.max(finding.confidence);
                existing.evidence.extend(finding.evidence);
                existing.found_versions.extend(finding.found_versions);
            }
            None => {
                merged.insert(finding.cve_id.clone(), finding);
            }
        }
    }
    merged
        .into_values()
        .map(|mut f| {
            f.evidence.sort_by(|a, b| a.key().cmp(&b.key()));
            f.evidence.dedup_by(|a, b| a.key() == b.key());
            f.found_versions.sort();
            f.found_versions.dedup();
            f
        })
        .collect()
}

fn dependency_detail(dep: &DependencyDecl) -> String {
    let version = dep
        .resolved_version
        .as_ref()
        .map(Log4jVersion::raw)
        .or_else(|| dep.version_text.clone())
        .unwrap_or_else(|| "(no version)".into());
    let mut detail = format!("{} {version}", dep.coordinates());
    let notes = dep.annotations();
    if !notes.is_empty() {
        detail.push_str(&format!(" [{}]", notes.join(", ")));
    }
    detail
}

fn hit_evidence(hit: &PatternHit) -> Evidence {
    Evidence {
        file: hit.file.clone(),
        line: hit.line,
        kind: match hit.form {
            HitForm::ConfigReference => EvidenceKind::ConfigReference,
            HitForm::Dotted | HitForm::PathForm => EvidenceKind::PatternHit,
        },
        detail: hit.matched_text.clone(),
    }
}

fn relativize(root: &Path, mut dep: DependencyDecl) -> DependencyDecl {
    dep.source_file = PathBuf::from(relative_slash(root, &dep.source_file));
    dep
}

fn initial_scan(poms: &[PathBuf], options: &PomOptions) -> InitialScanResult {
    let results: Vec<_> = poms.par_iter().map(|p| scan_pom_with(p, options)).collect();
    let mut merged = InitialScanResult::default();
    for r in results {
        merged.merge(r);
    }
    merged
}

/// A Log4j dependency whose version is unknown and not pinned by any other
/// declaration of the same coordinates.
fn has_undetermined_version(deps: &[&DependencyDecl]) -> bool {
    let pinned: BTreeSet<_> = deps
        .iter()
        .filter(|d| d.resolved_version.is_some())
        .map(|d| d.coordinates())
        .collect();
    deps.iter()
        .any(|d| d.resolved_version.is_none() && !pinned.contains(&d.coordinates()))
}

pub fn run_scan(root: &Path, config: &ScanConfig, kb: &KnowledgeBase) -> Result<ScanReport> {
    let started = Utc::now();
    if !root.is_dir() {
        return Err(Error::NoSuchPath(root.to_path_buf()));
    }

    let poms = discover_poms(root, &config.filter)?;
    let initial = initial_scan(&poms, &config.pom);
    let log4j_deps: Vec<&DependencyDecl> = initial
        .log4j_dependencies()
        .filter(|d| {
            !config
                .pom
                .excluded_artifacts
                .iter()
                .any(|a| a.eq_ignore_ascii_case(&d.artifact_id))
        })
        .collect();
    let detected: Vec<&Log4jVersion> = log4j_deps.iter().filter_map(|d| d.resolved_version.as_ref()).collect();

    let needs_deep = poms.is_empty()
        || initial.parse_failed
        || !initial.vulnerable.is_empty()
        || has_undetermined_version(&log4j_deps);

    let mut version_findings = Vec::new();
    for (dep, _class) in &initial.vulnerable {
        let Some(version) = &dep.resolved_version else {
            continue;
        };
        let evidence = Evidence {
            file: relative_slash(root, &dep.source_file),
            line: dep.line.unwrap_or(0),
            kind: EvidenceKind::DependencyVersion,
            detail: dependency_detail(dep),
        };
        for record in kb.cves_for_version(version) {
            let confidence = if record.is_pattern_gated() {
                Confidence::VersionOnly
            } else {
                Confidence::Confirmed
            };
            let mut finding = Finding::from_record(record, confidence, vec![evidence.clone()]);
            finding
                .found_versions
                .push(format!("{} {}", dep.artifact_id, version.raw()));
            version_findings.push(finding);
        }
    }

    let mut warnings = initial.errors.clone();
    let mut files_scanned = poms.len();
    let mut pattern_findings = Vec::new();
    if needs_deep {
        let outcome = deep_scan(root, &config.filter, kb.patterns())?;
        files_scanned += outcome.files_scanned;
        warnings.extend(outcome.warnings);

        for hit in &outcome.hits {
            for record in kb.cves_for_pattern(hit.pattern_id, None)? {
                let applies = detected.is_empty() || detected.iter().any(|v| record.applies_to(v));
                if applies {
                    pattern_findings.push(Finding::from_record(
                        record,
                        Confidence::Confirmed,
                        vec![hit_evidence(hit)],
                    ));
                }
            }
        }

        let version_evidence = detected.iter().map(|v| classify_version(v)).min();
        if let Some(seed) = detect_misconfiguration(&outcome.hits, version_evidence) {
            let record = kb.record(seed.cve_id)?;
            pattern_findings.push(Finding::from_record(
                record,
                Confidence::Confirmed,
                seed.hits.iter().map(hit_evidence).collect(),
            ));
        }
    }

    let mut findings = rank_findings(merge_evidence(version_findings, pattern_findings));
    if config.strict {
        findings.retain(|f| f.confidence != Confidence::VersionOnly);
    }

    Ok(ScanReport {
        root: root.display().to_string(),
        verdict: if findings.is_empty() {
            Verdict::NotVulnerable
        } else {
            Verdict::Vulnerable
        },
        mode_reached: if needs_deep {
            ScanMode::DeepScan
        } else {
            ScanMode::InitialOnly
        },
        findings,
        dependencies_seen: initial.dependencies.into_iter().map(|d| relativize(root, d)).collect(),
        files_scanned,
        warnings,
        started,
        finished: Utc::now(),
        tool_version: TOOL_VERSION.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finding(id: &str, tenths: u8) -> Finding {
        let score = Score::from_tenths(tenths).unwrap();
        Finding {
            cve_id: id.into(),
            base_score: score,
            severity_band: score.band(),
            confidence: Confidence::Confirmed,
            evidence: vec![ev("pom.xml", 3, EvidenceKind::DependencyVersion)],
            affected_versions_note: String::new(),
            found_versions: Vec::new(),
            recommendation: "r".into(),
        }
    }

    fn ev(file: &str, line: usize, kind: EvidenceKind) -> Evidence {
        Evidence {
            file: file.into(),
            line,
            kind,
            detail: String::new(),
        }
    }

    fn ids(f: &[Finding]) -> Vec<&str> {
        f.iter().map(|f| f.cve_id.as_str()).collect()
    }

    #[test]
    fn ranking() {
        let ranked = rank_findings(vec![
            finding("CVE-2021-45105", 75),
            finding("CVE-2021-44228", 100),
            finding("CVE-2021-44832", 66),
        ]);
        assert_eq!(ids(&ranked), ["CVE-2021-44228", "CVE-2021-45105", "CVE-2021-44832"]);
        assert!(rank_findings(vec![]).is_empty());
        let ties = rank_findings(vec![finding("CVE-2021-4104", 75), finding("CVE-2020-9488", 75)]);
        assert_eq!(ids(&ties), ["CVE-2020-9488", "CVE-2021-4104"]);
    }

    #[test]
    fn merge_same_cve() {
        let mut by_pattern = finding("CVE-2021-44228", 100);
        by_pattern.evidence = vec![ev("src/A.java", 4, EvidenceKind::PatternHit)];
        let merged = merge_evidence(vec![finding("CVE-2021-44228", 100)], vec![by_pattern]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].evidence.len(), 2);
    }

    #[test]
    fn merge_disjoint_and_idempotent() {
        let merged = merge_evidence(vec![finding("A", 10)], vec![finding("B", 20)]);
        assert_eq!(ids(&merged), ["A", "B"]);
        let merged = merge_evidence(vec![finding("A", 10)], vec![finding("A", 10)]);
        assert_eq!(merged[0].evidence.len(), 1);
    }

    #[test]
    fn merge_keeps_strongest_confidence() {
        let mut weak = finding("A", 10);
        weak.confidence = Confidence::VersionOnly;
        let merged = merge_evidence(vec![weak.clone()], vec![finding("A", 10)]);
        assert_eq!(merged[0].confidence, Confidence::Confirmed);
        let merged = merge_evidence(vec![weak], vec![]);
        assert_eq!(merged[0].confidence, Confidence::VersionOnly);
    }

    #[test]
    fn undetermined_versions() {
        let mk = |artifact: &str, v: Option<&str>| DependencyDecl {
            group_id: "g".into(),
            artifact_id: artifact.into(),
            version_text: v.map(str::to_string),
            resolved_version: v.and_then(|v| crate::version::parse_version(v).ok()),
            source_file: PathBuf::from("pom.xml"),
            line: None,
            provenance: crate::pom::Provenance::Literal,
            scope: None,
            optional: false,
            managed: false,
        };
        let pinned = mk("log4j-core", Some("2.23.1"));
        let bare = mk("log4j-core", None);
        let other = mk("log4j-api", None);
        assert!(!has_undetermined_version(&[&pinned, &bare]));
        assert!(has_undetermined_version(&[&pinned, &bare, &other]));
        assert!(has_undetermined_version(&[&mk("log4j", Some("[1.2,1.3)"))]));
    }

    #[test]
    fn missing_root() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_scan(
            &dir.path().join("nope"),
            &ScanConfig::default(),
            KnowledgeBase::embedded(),
        );
        assert!(matches!(err, Err(Error::NoSuchPath(_))));
    }
}
