//! Initial scan: Log4j dependencies declared in Maven `pom.xml` files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::version::{classify_version, parse_version, Log4jVersion, VulnClass};
use crate::walk::{list_files, ScanFilter};

pub const POM_FILE_NAME: &str = "pom.xml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Literal,
    PropertyResolved,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyDecl {
    pub group_id: String,
    pub artifact_id: String,
    pub version_text: Option<String>,
    pub resolved_version: Option<Log4jVersion>,
    pub source_file: PathBuf,
    pub line: Option<usize>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub optional: bool,
    /// Declared under `dependencyManagement`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub managed: bool,
}

impl DependencyDecl {
    pub fn is_log4j(&self) -> bool {
        self.artifact_id.to_ascii_lowercase().contains("log4j")
    }

    pub fn coordinates(&self) -> String {
        format!("{}:{}", self.group_id, self.artifact_id)
    }

    /// Context that weakens the declaration, e.g. `scope=test`.
    pub fn annotations(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if let Some(scope) = &self.scope {
            if scope != "compile" {
                notes.push(format!("scope={scope}"));
            }
        }
        if self.optional {
            notes.push("optional".to_string());
        }
        notes
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InitialScanResult {
    pub dependencies: Vec<DependencyDecl>,
    pub vulnerable: Vec<(DependencyDecl, VulnClass)>,
    pub parse_failed: bool,
    pub errors: Vec<String>,
    pub scanned_files: Vec<PathBuf>,
}

impl InitialScanResult {
    pub fn merge(&mut self, other: InitialScanResult) {
        self.dependencies.extend(other.dependencies);
        self.vulnerable.extend(other.vulnerable);
        self.parse_failed |= other.parse_failed;
        self.errors.extend(other.errors);
        self.scanned_files.extend(other.scanned_files);
    }

    pub fn log4j_dependencies(&self) -> impl Iterator<Item = &DependencyDecl> {
        self.dependencies.iter().filter(|d| d.is_log4j())
    }
}

/// Artifact ids that contain "log4j" but should not be treated as Log4j,
/// e.g. bridge shims such as `log4j-over-slf4j`. Empty by default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PomOptions {
    pub excluded_artifacts: Vec<String>,
}

impl PomOptions {
    fn excludes(&self, artifact_id: &str) -> bool {
        self.excluded_artifacts
            .iter()
            .any(|a| a.eq_ignore_ascii_case(artifact_id))
    }
}

pub fn scan_pom(file: &Path) -> InitialScanResult {
    scan_pom_with(file, &PomOptions::default())
}

/// Never fails: unreadable or malformed files come back with `parse_failed`
/// set and no dependencies, which obliges the caller to run a deep scan.
pub fn scan_pom_with(file: &Path, options: &PomOptions) -> InitialScanResult {
    let failed = |message: String| InitialScanResult {
        parse_failed: true,
        errors: vec![format!("{}: {message}", file.display())],
        scanned_files: vec![file.to_path_buf()],
        ..InitialScanResult::default()
    };

    let text = match fs::read(file) {
        Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
        Err(e) => return failed(e.to_string()),
    };
    let doc = match Document::parse(&text) {
        Ok(doc) => doc,
        Err(e) => return failed(e.to_string()),
    };

    let root = doc.root_element();
    let properties = read_properties(root);
    let mut result = InitialScanResult {
        scanned_files: vec![file.to_path_buf()],
        ..InitialScanResult::default()
    };

    for dep in root.descendants().filter(|n| is_dependency(*n)) {
        let decl = read_dependency(&doc, dep, &properties, file);
        if decl.is_log4j() && !options.excludes(&decl.artifact_id) {
            if let Some(v) = &decl.resolved_version {
                let class = classify_version(v);
                if class.is_vulnerable() {
                    result.vulnerable.push((decl.clone(), class));
                }
            }
        }
        result.dependencies.push(decl);
    }
    result
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn child_text(node: Node, name: &str) -> Option<String> {
    child(node, name)
        .and_then(|c| c.text())
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
}

fn is_dependency(node: Node) -> bool {
    node.is_element()
        && node.tag_name().name() == "dependency"
        && node
            .parent_element()
            .is_some_and(|p| p.tag_name().name() == "dependencies")
}

fn read_properties(root: Node) -> BTreeMap<String, String> {
    child(root, "properties")
        .map(|props| {
            props
                .children()
                .filter(Node::is_element)
                .map(|p| {
                    (
                        p.tag_name().name().to_string(),
                        p.text().unwrap_or("").trim().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default()
}

fn read_dependency(doc: &Document, dep: Node, properties: &BTreeMap<String, String>, file: &Path) -> DependencyDecl {
    let version_text = child_text(dep, "version");
    let (resolved_text, provenance) = match &version_text {
        None => (None, Provenance::Unresolved),
        Some(text) if text.contains("${") => match resolve_placeholder(text, properties) {
            Some(resolved) => (Some(resolved), Provenance::PropertyResolved),
            None => (None, Provenance::Unresolved),
        },
        Some(text) => (Some(text.clone()), Provenance::Literal),
    };
    let resolved_version = resolved_text.as_deref().and_then(|t| parse_version(t).ok());
    let managed = dep
        .ancestors()
        .any(|a| a.is_element() && a.tag_name().name() == "dependencyManagement");

    DependencyDecl {
        group_id: child_text(dep, "groupId").unwrap_or_default(),
        artifact_id: child_text(dep, "artifactId").unwrap_or_default(),
        version_text,
        resolved_version,
        source_file: file.to_path_buf(),
        line: Some(doc.text_pos_at(dep.range().start).row as usize),
        provenance,
        scope: child_text(dep, "scope"),
        optional: child_text(dep, "optional").is_some_and(|o| o.eq_ignore_ascii_case("true")),
        managed,
    }
}

/// Substitutes `${key}` references from `properties`, one level deep.
/// Returns `None` when any referenced key is missing.
pub fn resolve_placeholder(version_text: &str, properties: &BTreeMap<String, String>) -> Option<String> {
    let mut out = String::with_capacity(version_text.len());
    let mut rest = version_text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find('}')?;
        out.push_str(properties.get(after[..end].trim())?);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Some(out)
}

/// Every `pom.xml` under `root`, sorted, honoring the filter's ignore rules.
pub fn discover_poms(root: &Path, filter: &ScanFilter) -> Result<Vec<PathBuf>> {
    let listing = list_files(root, filter)?;
    Ok(listing
        .files
        .into_iter()
        .filter(|p| p.file_name().is_some_and(|n| n == POM_FILE_NAME))
        .collect())
}
