//! Deterministic traversal of a scan root.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Component, Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use walkdir::WalkDir;

use crate::error::{Error, Result};

/// Name of the optional ignore file read from the scan root.
pub const IGNORE_FILE: &str = ".log4shieldignore";

/// 16 MiB.
pub const DEFAULT_MAX_FILE_BYTES: u64 = 16 * 1024 * 1024;

pub const DEFAULT_IGNORED_DIRS: [&str; 5] = [".git", "target", "build", "node_modules", ".idea"];

/// Bytes inspected by the binary heuristic.
pub const SNIFF_BYTES: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanFilter {
    pub max_file_bytes: u64,
    pub ignored_dirs: BTreeSet<String>,
    pub binary_detection: bool,
    /// Extra glob patterns, matched against `/`-separated paths relative to the root.
    pub ignore_globs: Vec<String>,
}

impl Default for ScanFilter {
    fn default() -> Self {
        ScanFilter {
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            ignored_dirs: DEFAULT_IGNORED_DIRS.iter().map(|s| s.to_string()).collect(),
            binary_detection: true,
            ignore_globs: Vec::new(),
        }
    }
}

impl ScanFilter {
    pub fn in_ignored_dir(&self, path: &Path) -> bool {
        let Some(parent) = path.parent() else {
            return false;
        };
        parent.components().any(|c| match c {
            Component::Normal(name) => name.to_str().is_some_and(|n| self.ignored_dirs.contains(n)),
            _ => false,
        })
    }
}

/// Files under a root plus anything that could not be visited.
#[derive(Debug, Default)]
pub struct Listing {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Reads glob patterns from `root/.log4shieldignore`: one per line, `#` starts a comment.
pub fn read_ignore_file(root: &Path) -> Vec<String> {
    let Ok(text) = fs::read_to_string(root.join(IGNORE_FILE)) else {
        return Vec::new();
    };
    parse_ignore_lines(&text)
}

pub fn parse_ignore_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn build_globs(patterns: &[String], warnings: &mut Vec<String>) -> GlobSet {
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let pattern = pattern.trim_start_matches("./").trim_end_matches('/');
        match Glob::new(pattern) {
            Ok(g) => {
                builder.add(g);
            }
            Err(e) => warnings.push(format!("ignoring invalid glob `{pattern}`: {e}")),
        }
    }
    builder.build().unwrap_or_else(|_| GlobSet::empty())
}

/// `/`-separated path of `path` relative to `root`.
pub fn relative_slash(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<_> = rel
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect();
    parts.join("/")
}

/// Every regular file under `root`, sorted, skipping ignored directories and
/// paths matched by the filter globs or the root's ignore file.
pub fn list_files(root: &Path, filter: &ScanFilter) -> Result<Listing> {
    if !root.is_dir() {
        return Err(Error::NoSuchPath(root.to_path_buf()));
    }
    let mut listing = Listing::default();
    let mut patterns = filter.ignore_globs.clone();
    patterns.extend(read_ignore_file(root));
    let globs = build_globs(&patterns, &mut listing.warnings);

    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|entry| {
            if entry.depth() == 0 {
                return true;
            }
            if entry.file_type().is_dir()
                && entry
                    .file_name()
                    .to_str()
                    .is_some_and(|n| filter.ignored_dirs.contains(n))
            {
                return false;
            }
            globs.is_empty() || !globs.is_match(relative_slash(root, entry.path()))
        });

    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => listing.files.push(e.into_path()),
            Ok(_) => {}
            Err(e) => listing.warnings.push(format!("cannot traverse: {e}")),
        }
    }
    listing.files.sort();
    Ok(listing)
}
