//! CVE knowledge base.
//!
//! The default base is compiled into the binary from `data/kb.toml`; an
//! alternative file with the same schema can be loaded at runtime. Loading
//! validates every record and reports problems with the offending line.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::cvss::Score;
use crate::error::{line_of, Error, Result};
use crate::version::{parse_version, Log4jVersion, VersionRange};

pub const EMBEDDED_KB: &str = include_str!("../data/kb.toml");

/// Pseudo-CVE raised for appender usage without any version evidence.
pub const MISCONFIGURATION_ID: &str = "Potential misconfiguration";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternId {
    JndiLookup,
    SocketServer,
    SMTPAppender,
    JMSAppender,
    JMSSink,
    JDBCAppender,
    Chainsaw,
}

impl PatternId {
    pub const ALL: [PatternId; 7] = [
        PatternId::JndiLookup,
        PatternId::SocketServer,
        PatternId::SMTPAppender,
        PatternId::JMSAppender,
        PatternId::JMSSink,
        PatternId::JDBCAppender,
        PatternId::Chainsaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternId::JndiLookup => "JndiLookup",
            PatternId::SocketServer => "SocketServer",
            PatternId::SMTPAppender => "SMTPAppender",
            PatternId::JMSAppender => "JMSAppender",
            PatternId::JMSSink => "JMSSink",
            PatternId::JDBCAppender => "JDBCAppender",
            PatternId::Chainsaw => "Chainsaw",
        }
    }

    /// Appender-style components whose bare presence suggests a risky
    /// logging configuration.
    pub fn is_appender(self) -> bool {
        !matches!(self, PatternId::JndiLookup | PatternId::SocketServer)
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PatternId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPattern(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generation {
    V1,
    V2,
    Both,
}

impl FromStr for Generation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "v1" => Ok(Generation::V1),
            "v2" => Ok(Generation::V2),
            "both" => Ok(Generation::Both),
            other => Err(format!("unknown generation `{other}` (expected v1, v2 or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trigger<'a> {
    VersionOnly,
    Patterns(&'a [PatternId]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CveRecord {
    pub id: String,
    pub base_score: Score,
    pub generation: Generation,
    /// `None` for records that are never triggered by a version alone.
    pub affected: Option<VersionRange>,
    pub patterns: Vec<PatternId>,
    pub recommendation: String,
}

impl CveRecord {
    pub fn trigger(&self) -> Trigger<'_> {
        if self.patterns.is_empty() {
            Trigger::VersionOnly
        } else {
            Trigger::Patterns(&self.patterns)
        }
    }

    pub fn applies_to(&self, v: &Log4jVersion) -> bool {
        self.affected.as_ref().is_some_and(|r| r.contains(v))
    }

    /// 1.x CVEs tied to a specific class. A version match alone is weaker
    /// evidence for these than a detected usage of the class.
    pub fn is_pattern_gated(&self) -> bool {
        self.generation == Generation::V1 && !self.patterns.is_empty()
    }

    pub fn affected_note(&self) -> String {
        match &self.affected {
            Some(r) => format!("affects Log4j {r}"),
            None => "not tied to a version range".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRule {
    pub id: PatternId,
    pub dotted_form: String,
    pub path_form: String,
    pub linked_cves: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    records: Vec<CveRecord>,
    patterns: Vec<PatternRule>,
    source: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    cve: Vec<Spanned<RawCve>>,
    #[serde(default)]
    pattern: Vec<Spanned<RawPattern>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCve {
    id: Spanned<String>,
    score: Spanned<f64>,
    generation: Spanned<String>,
    low: Option<Spanned<String>>,
    high: Option<Spanned<String>>,
    #[serde(default)]
    exclusions: Vec<Spanned<String>>,
    #[serde(default)]
    patterns: Vec<Spanned<String>>,
    recommendation: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    id: Spanned<String>,
    dotted: Spanned<String>,
    path: Option<Spanned<String>>,
    cves: Spanned<Vec<Spanned<String>>>,
}

struct Loader<'a> {
    text: &'a str,
    file: &'a Path,
}

impl Loader<'_> {
    fn err<T>(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> Result<T> {
        Err(Error::KnowledgeBase {
            file: self.file.to_path_buf(),
            line: line_of(self.text, span.start),
            message: message.into(),
        })
    }

    fn version(&self, raw: &Spanned<String>) -> Result<Log4jVersion> {
        parse_version(raw.get_ref()).or_else(|_| self.err(raw.span(), format!("malformed version `{}`", raw.get_ref())))
    }

    fn pattern_id(&self, raw: &Spanned<String>) -> Result<PatternId> {
        raw.get_ref()
            .parse()
            .or_else(|_| self.err(raw.span(), format!("unknown pattern `{}`", raw.get_ref())))
    }
}

impl KnowledgeBase {
    /// The compiled-in knowledge base.
    pub fn embedded() -> &'static KnowledgeBase {
        static KB: OnceLock<KnowledgeBase> = OnceLock::new();
        KB.get_or_init(|| {
            KnowledgeBase::from_toml_str(EMBEDDED_KB, Path::new("<embedded kb.toml>"))
                .expect("embedded knowledge base is valid")
        })
    }

    pub fn load(path: &Path) -> Result<KnowledgeBase> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KnowledgeBase::from_toml_str(&text, path)
    }

    pub fn from_toml_str(text: &str, file: &Path) -> Result<KnowledgeBase> {
        let loader = Loader { text, file };
        let raw: RawFile = toml::from_str(text).or_else(|e| {
            let span = e.span().unwrap_or(0..0);
            loader.err(span, e.message().to_string())
        })?;

        let mut records = Vec::with_capacity(raw.cve.len());
        let mut seen = BTreeSet::new();
        for entry in &raw.cve {
            let c = entry.get_ref();
            let id = c.id.get_ref().trim();
            if id.is_empty() {
                return loader.err(c.id.span(), "empty CVE id");
            }
            if !seen.insert(id.to_string()) {
                return loader.err(c.id.span(), format!("duplicate CVE id `{id}`"));
            }
            let base_score = Score::from_f64(*c.score.get_ref()).map_or_else(
                || {
                    loader.err(
                        c.score.span(),
                        format!("score {} is not a one-decimal value in [0, 10]", c.score.get_ref()),
                    )
                },
                Ok,
            )?;
            let generation = c
                .generation
                .get_ref()
                .parse()
                .or_else(|m: String| loader.err(c.generation.span(), m))?;
            let affected = match (&c.low, &c.high) {
                (Some(low), Some(high)) => {
                    let exclusions = c
                        .exclusions
                        .iter()
                        .map(|e| loader.version(e))
                        .collect::<Result<Vec<_>>>()?;
                    let range = VersionRange::new(loader.version(low)?, loader.version(high)?, exclusions);
                    Some(range.or_else(|m| loader.err(low.span(), m))?)
                }
                (None, None) if c.exclusions.is_empty() => None,
                (None, None) => {
                    return loader.err(c.exclusions[0].span(), "exclusions given without low/high");
                }
                _ => return loader.err(entry.span(), format!("`{id}` needs both low and high")),
            };
            let mut patterns = Vec::with_capacity(c.patterns.len());
            for p in &c.patterns {
                patterns.push(loader.pattern_id(p)?);
            }
            let recommendation = c.recommendation.get_ref().trim().to_string();
            if recommendation.is_empty() {
                return loader.err(c.recommendation.span(), format!("`{id}` has an empty recommendation"));
            }
            records.push(CveRecord {
                id: id.to_string(),
                base_score,
                generation,
                affected,
                patterns,
                recommendation,
            });
        }

        let mut patterns: Vec<PatternRule> = Vec::with_capacity(raw.pattern.len());
        for entry in &raw.pattern {
            let p = entry.get_ref();
            let id = loader.pattern_id(&p.id)?;
            if patterns.iter().any(|q| q.id == id) {
                return loader.err(p.id.span(), format!("duplicate pattern `{id}`"));
            }
            let dotted_form = p.dotted.get_ref().trim().to_string();
            if dotted_form.is_empty() || dotted_form.contains('/') {
                return loader.err(p.dotted.span(), "dotted form must be a non-empty dotted class name");
            }
            let expected_path = dotted_form.replace('.', "/");
            let path_form = match &p.path {
                Some(path) if path.get_ref() != &expected_path => {
                    return loader.err(
                        path.span(),
                        format!("path form `{}` does not denote `{dotted_form}`", path.get_ref()),
                    );
                }
                _ => expected_path,
            };
            if p.cves.get_ref().is_empty() {
                return loader.err(p.cves.span(), format!("pattern `{id}` links no CVEs"));
            }
            let mut linked_cves = Vec::new();
            for cve in p.cves.get_ref() {
                let Some(record) = records.iter().find(|r| r.id == *cve.get_ref()) else {
                    return loader.err(
                        cve.span(),
                        format!("pattern `{id}` links unknown CVE `{}`", cve.get_ref()),
                    );
                };
                if !record.patterns.contains(&id) {
                    return loader.err(cve.span(), format!("`{}` does not list pattern `{id}`", record.id));
                }
                linked_cves.push(record.id.clone());
            }
            patterns.push(PatternRule {
                id,
                dotted_form,
                path_form,
                linked_cves,
            });
        }

        for (entry, record) in raw.cve.iter().zip(&records) {
            for (pid, raw_pid) in record.patterns.iter().zip(&entry.get_ref().patterns) {
                let linked = patterns
                    .iter()
                    .find(|p| p.id == *pid)
                    .is_some_and(|p| p.linked_cves.contains(&record.id));
                if !linked {
                    return loader.err(
                        raw_pid.span(),
                        format!("`{}` references pattern `{pid}` which does not link back", record.id),
                    );
                }
            }
        }

        Ok(KnowledgeBase {
            records,
            patterns,
            source: file.to_path_buf(),
        })
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    /// Every record in file order.
    pub fn kb_contents(&self) -> &[CveRecord] {
        &self.records
    }

    pub fn patterns(&self) -> &[PatternRule] {
        &self.patterns
    }

    pub fn pattern(&self, id: PatternId) -> Option<&PatternRule> {
        self.patterns.iter().find(|p| p.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&CveRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn record(&self, id: &str) -> Result<&CveRecord> {
        self.get(id).ok_or_else(|| Error::UnknownCve(id.to_string()))
    }

    /// Records whose affected range contains `v`, highest score first.
    pub fn cves_for_version(&self, v: &Log4jVersion) -> Vec<&CveRecord> {
        let mut out: Vec<_> = self.records.iter().filter(|r| r.applies_to(v)).collect();
        sort_records(&mut out);
        out
    }

    /// CVEs linked to a pattern, in link order, optionally restricted to
    /// those whose range contains `v`.
    pub fn cves_for_pattern(&self, p: PatternId, v: Option<&Log4jVersion>) -> Result<Vec<&CveRecord>> {
        let rule = self.pattern(p).ok_or_else(|| Error::UnknownPattern(p.to_string()))?;
        Ok(rule
            .linked_cves
            .iter()
            .filter_map(|id| self.get(id))
            .filter(|r| v.is_none_or(|v| r.applies_to(v)))
            .collect())
    }

    pub fn recommendation_for(&self, id: &str) -> Result<&str> {
        self.record(id).map(|r| r.recommendation.as_str())
    }
}

/// Score descending, then id ascending.
pub fn sort_records(records: &mut [&CveRecord]) {
    records.sort_by(|a, b| b.base_score.cmp(&a.base_score).then_with(|| a.id.cmp(&b.id)));
}
