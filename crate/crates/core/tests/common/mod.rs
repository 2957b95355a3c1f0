//! Fixtures and independent oracles shared by the integration tests.
//!
//! Nothing here calls into the library's classification or matching code;
//! the oracles restate the rules from scratch so they can disagree.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn scenario(name: &str) -> PathBuf {
    fixtures().join("scenarios").join(name)
}

pub fn corpus_manifest() -> PathBuf {
    fixtures().join("corpus/manifest.toml")
}

pub fn recorded_manifest() -> PathBuf {
    fixtures().join("recorded-140.toml")
}

/// Every scenario tree plus every corpus release directory.
pub fn all_fixture_roots() -> Vec<PathBuf> {
    let mut roots: Vec<PathBuf> = ["clean-2.23.1", "mybatis-358", "v1-no-jndi", "malformed-pom"]
        .iter()
        .map(|s| scenario(s))
        .collect();
    let corpus = fixtures().join("corpus");
    let mut projects: Vec<_> = fs::read_dir(&corpus)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    projects.sort();
    for p in projects {
        let mut releases: Vec<_> = fs::read_dir(&p).unwrap().map(|e| e.unwrap().path()).collect();
        releases.sort();
        roots.extend(releases);
    }
    roots
}

// ---------------------------------------------------------------------------
// Knowledge base table, as published.

pub const PUBLISHED_SCORES: [(&str, &str); 11] = [
    ("CVE-2021-44228", "10.0"),
    ("CVE-2022-23307", "10.0"),
    ("CVE-2021-45046", "9.0"),
    ("CVE-2022-23302", "9.0"),
    ("CVE-2022-23305", "9.1"),
    ("CVE-2019-17571", "9.8"),
    ("CVE-2021-45105", "7.5"),
    ("CVE-2020-9488", "7.5"),
    ("CVE-2021-4104", "7.5"),
    ("CVE-2021-44832", "6.6"),
    ("Potential misconfiguration", "5.0"),
];

// ---------------------------------------------------------------------------
// Version oracle. Versions become (major, minor, patch, qualifier rank, n)
// tuples; release outranks rc, rc outranks beta, beta outranks alpha.

pub type Tuple = (u32, u32, u32, u32, u32);

pub fn tuple(s: &str) -> Tuple {
    let (nums, qual) = match s.find(|c: char| c.is_ascii_alphabetic()) {
        Some(i) => (s[..i].trim_end_matches(['-', '.']), &s[i..]),
        None => (s, ""),
    };
    let mut parts = nums.split('.').map(|p| p.parse::<u32>().unwrap());
    let major = parts.next().unwrap();
    let minor = parts.next().unwrap_or(0);
    let patch = parts.next().unwrap_or(0);
    let digits: String = qual.chars().filter(|c| c.is_ascii_digit()).collect();
    let n = digits.parse().unwrap_or(0);
    let rank = if qual.is_empty() {
        3
    } else if qual.starts_with("rc") {
        2
    } else if qual.starts_with("beta") {
        1
    } else {
        0
    };
    (major, minor, patch, rank, n)
}

pub const BACKPORTS: [&str; 4] = ["2.3.1", "2.3.2", "2.12.3", "2.12.4"];

/// "v1", "v2" or "none".
pub fn oracle_class(v: &str) -> &'static str {
    let t = tuple(v);
    if t.0 == 1 {
        "v1"
    } else if t.0 == 2 && t < tuple("2.17.1") && !BACKPORTS.iter().any(|b| tuple(b) == t) {
        "v2"
    } else {
        "none"
    }
}

/// Affected range per CVE: inclusive low, inclusive high, excluded releases.
pub const RANGES: [(&str, &str, &str, &[&str]); 10] = [
    (
        "CVE-2021-44228",
        "2.0-beta9",
        "2.14.1",
        &["2.3.1", "2.3.2", "2.12.2", "2.12.3", "2.12.4"],
    ),
    (
        "CVE-2021-45046",
        "2.0-beta9",
        "2.15.0",
        &["2.3.1", "2.3.2", "2.12.2", "2.12.3", "2.12.4"],
    ),
    (
        "CVE-2021-45105",
        "2.0-beta9",
        "2.16.0",
        &["2.3.1", "2.3.2", "2.12.3", "2.12.4"],
    ),
    ("CVE-2021-44832", "2.0-beta9", "2.17.0", &["2.3.2", "2.12.4"]),
    ("CVE-2020-9488", "2.0-beta9", "2.13.1", &["2.12.3", "2.12.4"]),
    ("CVE-2019-17571", "1.0", "1.2.17", &[]),
    ("CVE-2021-4104", "1.0", "1.2.17", &[]),
    ("CVE-2022-23302", "1.0", "1.2.17", &[]),
    ("CVE-2022-23305", "1.0", "1.2.17", &[]),
    ("CVE-2022-23307", "1.0", "1.2.17", &[]),
];

pub fn oracle_cves(v: &str) -> BTreeSet<String> {
    let t = tuple(v);
    RANGES
        .iter()
        .filter(|(_, lo, hi, ex)| tuple(lo) <= t && t <= tuple(hi) && !ex.iter().any(|e| tuple(e) == t))
        .map(|(id, ..)| id.to_string())
        .collect()
}

pub const GATE_VERSIONS: [&str; 13] = [
    "1.2.17",
    "2.0-beta9",
    "2.3.1",
    "2.3.2",
    "2.12.3",
    "2.12.4",
    "2.14.1",
    "2.15.0",
    "2.16.0",
    "2.17.0",
    "2.17.1",
    "2.17.2",
    "2.23.1",
];

// ---------------------------------------------------------------------------
// Pattern oracle: a plain substring search over fixed class names.

pub const CLASS_NAMES: [(&str, &str); 7] = [
    ("JndiLookup", "org.apache.logging.log4j.core.lookup.JndiLookup"),
    ("SocketServer", "org.apache.log4j.net.SocketServer"),
    ("SMTPAppender", "org.apache.log4j.net.SMTPAppender"),
    ("JMSAppender", "org.apache.log4j.net.JMSAppender"),
    ("JMSSink", "org.apache.log4j.net.JMSSink"),
    ("JDBCAppender", "org.apache.log4j.jdbc.JDBCAppender"),
    ("Chainsaw", "org.apache.log4j.chainsaw"),
];

/// (relative file, line, pattern name) for every occurrence of either form.
pub fn grep_oracle(root: &Path) -> BTreeSet<(String, usize, String)> {
    let mut out = BTreeSet::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.unwrap();
        if !entry.file_type().is_file() || entry.file_name() == "pom.xml" {
            continue;
        }
        let bytes = fs::read(entry.path()).unwrap();
        if bytes.contains(&0) {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap()
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let text = String::from_utf8(bytes).unwrap();
        for (n, line) in text.lines().enumerate() {
            for (name, dotted) in CLASS_NAMES {
                let slashed = dotted.replace('.', "/");
                if line.contains(dotted) || line.contains(&slashed) {
                    out.insert((rel.clone(), n + 1, name.to_string()));
                }
            }
        }
    }
    out
}

/// Plants every class in both forms across `files` files. Returns the number
/// of lines that carry a plant.
pub fn plant_patterns(root: &Path, files: usize) -> usize {
    let exts = ["java", "properties", "xml", "sh", "txt"];
    let mut planted = 0;
    for i in 0..files {
        let dir = root.join(format!("module{}/src", i % 4));
        fs::create_dir_all(&dir).unwrap();
        let mut body = String::new();
        for line in 0..12 {
            let k = i * 12 + line;
            if k % 3 == 0 {
                let (_, dotted) = CLASS_NAMES[(k / 3) % 7];
                let text = if (k / 21) % 2 == 0 {
                    dotted.to_string()
                } else {
                    dotted.replace('.', "/")
                };
                body.push_str(&format!("  ref = {text}.Thing;\n"));
                planted += 1;
            } else {
                body.push_str(&format!("  filler line {k} org.apache.logging.log4j.Logger\n"));
            }
        }
        fs::write(dir.join(format!("file{i}.{}", exts[i % exts.len()])), body).unwrap();
    }
    planted
}

// ---------------------------------------------------------------------------
// CVSS oracle over integer thousandths.

/// Tenths of the one-decimal round-up of `a + b`, capped at 100.
pub fn cvss_oracle_thousandths(a: u32, b: u32) -> u32 {
    let sum = a + b;
    let tenths = sum.div_ceil(100);
    tenths.min(100)
}

pub fn thousandths_to_f64(x: u32) -> f64 {
    format!("{}.{:03}", x / 1000, x % 1000).parse().unwrap()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_log4shield")
}

/// Replaces timestamp values so two JSON bodies can be compared byte for byte.
pub fn strip_timestamps(body: &str) -> String {
    body.lines()
        .map(|l| {
            let t = l.trim_start();
            if t.starts_with("\"started\"") || t.starts_with("\"finished\"") {
                let indent = &l[..l.len() - t.len()];
                let key = &t[..t.find(':').unwrap()];
                format!("{indent}{key}: \"<ts>\",")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
