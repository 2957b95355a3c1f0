//! Offline accuracy evaluation over a manifest of project trees.
//!
//! Each manifest entry names a local tree and the verdict (and optionally
//! the CVE set) it is expected to produce. Entries may instead carry a
//! recorded outcome from an earlier run, in which case no scan happens and
//! only the scoring arithmetic is exercised.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{line_of, Error, Result};
use crate::kb::KnowledgeBase;
use crate::pipeline::{run_scan, ScanConfig, Verdict};
use crate::report::Format;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedOutcome {
    pub verdict: Verdict,
    #[serde(default)]
    pub cves: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub project: Option<String>,
    /// Resolved against the manifest's directory.
    pub path: Option<PathBuf>,
    pub expected_verdict: Verdict,
    pub expected_cves: Option<BTreeSet<String>>,
    pub notes: String,
    pub recorded: Option<RecordedOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    entry: Vec<Spanned<RawEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    name: Spanned<String>,
    project: Option<String>,
    path: Option<String>,
    expected_verdict: Verdict,
    expected_cves: Option<BTreeSet<String>>,
    #[serde(default)]
    notes: String,
    recorded: Option<RecordedOutcome>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<CorpusManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        CorpusManifest::from_toml_str(&text, path, base)
    }

    pub fn from_toml_str(text: &str, file: &Path, base_dir: &Path) -> Result<CorpusManifest> {
        let err = |offset: usize, message: String| Error::Manifest {
            file: file.to_path_buf(),
            line: line_of(text, offset),
            message,
        };
        let raw: RawManifest =
            toml::from_str(text).map_err(|e| err(e.span().map_or(0, |s| s.start), e.message().to_string()))?;

        let mut names = BTreeSet::new();
        let mut entries = Vec::with_capacity(raw.entry.len());
        for spanned in raw.entry {
            let span = spanned.span();
            let e = spanned.into_inner();
            let name = e.name.get_ref().trim().to_string();
            if name.is_empty() {
                return Err(err(e.name.span().start, "empty entry name".into()));
            }
            if !names.insert(name.clone()) {
                return Err(err(e.name.span().start, format!("duplicate entry name `{name}`")));
            }
            if e.path.is_none() && e.recorded.is_none() {
                return Err(err(
                    span.start,
                    format!("entry `{name}` needs a path or a recorded outcome"),
                ));
            }
            entries.push(ManifestEntry {
                name,
                project: e.project,
                path: e.path.map(|p| base_dir.join(p)),
                expected_verdict: e.expected_verdict,
                expected_cves: e.expected_cves,
                notes: e.notes,
                recorded: e.recorded,
            });
        }
        Ok(CorpusManifest { entries })
    }

    /// Entry count per project key.
    pub fn projects(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.project.clone().unwrap_or_else(|| e.name.clone()))
                .or_default() += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    FalsePositive,
    FalseNegative,
    WrongCves,
    Errored,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveDiff {
    /// Reported but not expected.
    pub added: BTreeSet<String>,
    /// Expected but not reported.
    pub missing: BTreeSet<String>,
}

impl CveDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.missing.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryResult {
    pub name: String,
    pub expected: Verdict,
    pub actual: Option<Verdict>,
    pub outcome: Outcome,
    pub cve_diff: CveDiff,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Scorable entries; errored entries are excluded.
    pub total: usize,
    pub correct: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub wrong_cves: usize,
    pub errored: usize,
    /// `correct / total`; `None` when nothing was scorable.
    pub accuracy: Option<f64>,
    pub per_entry: Vec<EntryResult>,
}

impl EvalResult {
    /// Accuracy rounded to three decimals.
    pub fn accuracy_rounded(&self) -> Option<f64> {
        self.accuracy.map(|a| (a * 1000.0).round() / 1000.0)
    }
}

/// Compares an actual verdict and CVE set against expectations.
pub fn classify_outcome(
    expected: Verdict,
    expected_cves: Option<&BTreeSet<String>>,
    actual: Verdict,
    actual_cves: &BTreeSet<String>,
) -> (Outcome, CveDiff) {
    let diff = expected_cves
        .map(|exp| CveDiff {
            added: actual_cves.difference(exp).cloned().collect(),
            missing: exp.difference(actual_cves).cloned().collect(),
        })
        .unwrap_or_default();
    let outcome = match (expected, actual) {
        (Verdict::NotVulnerable, Verdict::Vulnerable) => Outcome::FalsePositive,
        (Verdict::Vulnerable, Verdict::NotVulnerable) => Outcome::FalseNegative,
        _ if !diff.is_empty() => Outcome::WrongCves,
        _ => Outcome::Correct,
    };
    (outcome, diff)
}

/// Tallies per-entry results; entries are ordered by name.
pub fn score_entries(mut per_entry: Vec<EntryResult>) -> EvalResult {
    per_entry.sort_by(|a, b| a.name.cmp(&b.name));
    let count = |o: Outcome| per_entry.iter().filter(|e| e.outcome == o).count();
    let correct = count(Outcome::Correct);
    let false_positives = count(Outcome::FalsePositive);
    let false_negatives = count(Outcome::FalseNegative);
    let wrong_cves = count(Outcome::WrongCves);
    let errored = count(Outcome::Errored);
    let total = correct + false_positives + false_negatives + wrong_cves;
    EvalResult {
        total,
        correct,
        false_positives,
        false_negatives,
        wrong_cves,
        errored,
        accuracy: (total > 0).then(|| correct as f64 / total as f64),
        per_entry,
    }
}

fn evaluate_entry(entry: &ManifestEntry, config: &ScanConfig, kb: &KnowledgeBase) -> EntryResult {
    let errored = |message: String| EntryResult {
        name: entry.name.clone(),
        expected: entry.expected_verdict,
        actual: None,
        outcome: Outcome::Errored,
        cve_diff: CveDiff::default(),
        error: Some(message),
    };

    let (actual, cves) = if let Some(rec) = &entry.recorded {
        (rec.verdict, rec.cves.clone())
    } else {
        let Some(path) = &entry.path else {
            return errored("no path".into());
        };
        if !path.is_dir() {
            return errored(format!("missing path {}", path.display()));
        }
        match run_scan(path, config, kb) {
            Ok(report) => (
                report.verdict,
                report.findings.iter().map(|f| f.cve_id.clone()).collect(),
            ),
            Err(e) => return errored(e.to_string()),
        }
    };

    let (outcome, cve_diff) = classify_outcome(entry.expected_verdict, entry.expected_cves.as_ref(), actual, &cves);
    EntryResult {
        name: entry.name.clone(),
        expected: entry.expected_verdict,
        actual: Some(actual),
        outcome,
        cve_diff,
        error: None,
    }
}

pub fn run_corpus(manifest: &CorpusManifest, config: &ScanConfig, kb: &KnowledgeBase) -> EvalResult {
    let per_entry: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| evaluate_entry(e, config, kb))
        .collect();
    score_entries(per_entry)
}

fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Correct => "correct",
        Outcome::FalsePositive => "false positive",
        Outcome::FalseNegative => "false negative",
        Outcome::WrongCves => "wrong CVEs",
        Outcome::Errored => "error",
    }
}

fn join(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(", ")
}

pub fn render_eval(e: &EvalResult, format: Format) -> Result<Vec<u8>> {
    let Some(accuracy) = e.accuracy else {
        return Err(Error::EmptyCorpus);
    };
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                #[serde(flatten)]
                result: &'a EvalResult,
                accuracy_rounded: Option<f64>,
            }
            let mut body = serde_json::to_vec_pretty(&Out {
                result: e,
                accuracy_rounded: e.accuracy_rounded(),
            })?;
            body.push(b'\n');
            Ok(body)
        }
        Format::Text => {
            let width = e.per_entry.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{:<width$}  {:<14}  {:<14}  outcome",
                "entry", "expected", "actual"
            );
            for r in &e.per_entry {
                let actual = r.actual.map_or("-", Verdict::as_str);
                let _ = write!(
                    out,
                    "{:<width$}  {:<14}  {:<14}  {}",
                    r.name,
                    r.expected.as_str(),
                    actual,
                    outcome_label(r.outcome)
                );
                if !r.cve_diff.added.is_empty() {
                    let _ = write!(out, "  added: {}", join(&r.cve_diff.added));
                }
                if !r.cve_diff.missing.is_empty() {
                    let _ = write!(out, "  missing: {}", join(&r.cve_diff.missing));
                }
                if let Some(err) = &r.error {
                    let _ = write!(out, "  ({err})");
                }
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "\naccuracy: {:.1}% ({}/{} correct, accuracy {:.3}); false positives: {}, false negatives: {}, wrong CVEs: {}, errored: {}",
                accuracy * 100.0,
                e.correct,
                e.total,
                accuracy,
                e.false_positives,
                e.false_negatives,
                e.wrong_cves,
                e.errored
            );
            Ok(out.into_bytes())
        }
    }
}
