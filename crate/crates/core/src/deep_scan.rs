//! Deep scan: search every source file for vulnerable Log4j class references.
//!
//! Matching is exact, case-sensitive substring search for each rule's
//! fully-qualified dotted name and its `/`-separated path form. Hits found in
//! configuration files are reported as configuration references.

use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kb::{PatternId, PatternRule, MISCONFIGURATION_ID};
use crate::pom::POM_FILE_NAME;
use crate::version::VulnClass;
use crate::walk::{list_files, relative_slash, SNIFF_BYTES};

pub use crate::walk::ScanFilter;

const CONFIG_EXTENSIONS: [&str; 9] = ["properties", "xml", "yaml", "yml", "json", "conf", "cfg", "ini", "toml"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitForm {
    Dotted,
    PathForm,
    ConfigReference,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatternMatch {
    pub pattern_id: PatternId,
    pub line: usize,
    pub column: usize,
    pub matched_text: String,
    pub form: HitForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternHit {
    pub pattern_id: PatternId,
    /// `/`-separated, relative to the scan root.
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub matched_text: String,
    pub form: HitForm,
}

impl PatternHit {
    fn sort_key(&self) -> (&str, usize, usize, PatternId, HitForm) {
        (&self.file, self.line, self.column, self.pattern_id, self.form)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeepScanOutcome {
    /// Ordered by file, line, column.
    pub hits: Vec<PatternHit>,
    pub files_scanned: usize,
    pub files_skipped: usize,
    pub warnings: Vec<String>,
}

/// Every occurrence of every rule in `content`, in line/column order.
/// Lines and columns are 1-based; columns count bytes.
pub fn match_patterns(content: &str, rules: &[PatternRule]) -> Vec<PatternMatch> {
    let mut out = Vec::new();
    for (idx, line) in content.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        for rule in rules {
            for (needle, form) in [
                (rule.dotted_form.as_str(), HitForm::Dotted),
                (rule.path_form.as_str(), HitForm::PathForm),
            ] {
                if needle.is_empty() {
                    continue;
                }
                for (col, text) in line.match_indices(needle) {
                    out.push(PatternMatch {
                        pattern_id: rule.id,
                        line: idx + 1,
                        column: col + 1,
                        matched_text: text.to_string(),
                        form,
                    });
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// `len` is the file size in bytes; `first_bytes` its leading bytes.
pub fn is_scannable(file: &Path, len: u64, first_bytes: &[u8], filter: &ScanFilter) -> bool {
    if len > filter.max_file_bytes || filter.in_ignored_dir(file) {
        return false;
    }
    !(filter.binary_detection && first_bytes.contains(&0))
}

fn is_config_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| CONFIG_EXTENSIONS.iter().any(|c| c.eq_ignore_ascii_case(e)))
}

enum FileResult {
    Scanned(Vec<PatternHit>),
    Skipped,
    Failed(String),
}

fn scan_file(root: &Path, path: &Path, rules: &[PatternRule], filter: &ScanFilter) -> FileResult {
    let rel = relative_slash(root, path);
    let fail = |e: std::io::Error| FileResult::Failed(format!("{rel}: {e}"));
    let len = match fs::metadata(path) {
        Ok(m) => m.len(),
        Err(e) => return fail(e),
    };
    let mut file = match File::open(path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let mut head = Vec::with_capacity(SNIFF_BYTES);
    if let Err(e) = file.by_ref().take(SNIFF_BYTES as u64).read_to_end(&mut head) {
        return fail(e);
    }
    if !is_scannable(&PathBuf::from(&rel), len, &head, filter) {
        return FileResult::Skipped;
    }
    let mut bytes = head;
    if let Err(e) = file.read_to_end(&mut bytes) {
        return fail(e);
    }
    let content = String::from_utf8_lossy(&bytes);
    let config = is_config_file(path);
    let hits = match_patterns(&content, rules)
        .into_iter()
        .map(|m| PatternHit {
            pattern_id: m.pattern_id,
            file: rel.clone(),
            line: m.line,
            column: m.column,
            matched_text: m.matched_text,
            form: if config && m.form == HitForm::Dotted {
                HitForm::ConfigReference
            } else {
                m.form
            },
        })
        .collect();
    FileResult::Scanned(hits)
}

/// Scans all files under `root` except those named `pom.xml`.
/// Unreadable files become warnings; only a missing root is an error.
pub fn deep_scan(root: &Path, filter: &ScanFilter, rules: &[PatternRule]) -> Result<DeepScanOutcome> {
    let listing = list_files(root, filter)?;
    let candidates: Vec<_> = listing
        .files
        .iter()
        .filter(|p| p.file_name().is_none_or(|n| n != POM_FILE_NAME))
        .collect();

    let results: Vec<FileResult> = candidates
        .par_iter()
        .map(|path| scan_file(root, path, rules, filter))
        .collect();

    let mut outcome = DeepScanOutcome {
        warnings: listing.warnings,
        ..DeepScanOutcome::default()
    };
    for result in results {
        match result {
            FileResult::Scanned(hits) => {
                outcome.files_scanned += 1;
                outcome.hits.extend(hits);
            }
            FileResult::Skipped => outcome.files_skipped += 1,
            FileResult::Failed(w) => outcome.warnings.push(w),
        }
    }
    outcome.hits.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(outcome)
}

/// Evidence for the "Potential misconfiguration" finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MisconfigurationSeed {
    pub cve_id: &'static str,
    pub hits: Vec<PatternHit>,
}

/// Raised when appender classes are referenced but no Log4j version could be
/// determined from any pom.
pub fn detect_misconfiguration(
    hits: &[PatternHit],
    version_evidence: Option<VulnClass>,
) -> Option<MisconfigurationSeed> {
    if version_evidence.is_some() {
        return None;
    }
    let appender_hits: Vec<_> = hits.iter().filter(|h| h.pattern_id.is_appender()).cloned().collect();
    (!appender_hits.is_empty()).then_some(MisconfigurationSeed {
        cve_id: MISCONFIGURATION_ID,
        hits: appender_hits,
    })
}
