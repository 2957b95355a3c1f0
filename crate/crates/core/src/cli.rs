//! Command-line interface.
//!
//! Exit codes: `0` clean, `1` a finding at or above the threshold, `2` usage
//! or scan error. Reports go to stdout (or `--output`), diagnostics to stderr.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::cvss::Score;
use crate::error::Error;
use crate::eval::{render_eval, run_corpus, CorpusManifest};
use crate::kb::KnowledgeBase;
use crate::pipeline::{run_scan, ScanConfig};
use crate::pom::PomOptions;
use crate::report::{exit_code, render, Format, EXIT_CLEAN, EXIT_ERROR};
use crate::walk::ScanFilter;

#[derive(Debug, Parser)]
#[command(
    name = "log4shield",
    version,
    about = "Detect exploitable Log4j dependencies and class usage"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a project tree and report Log4j vulnerabilities.
    Scan(ScanArgs),
    /// Print the CVE knowledge base.
    Kb(KbArgs),
    /// Score the scanner against a corpus manifest.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct KbSource {
    /// Alternative knowledge base file.
    #[arg(long, env = "LOG4SHIELD_KB", global = true)]
    pub kb: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Directory to scan.
    #[arg(long, env = "GITHUB_WORKSPACE", default_value = ".")]
    pub root: PathBuf,

    #[arg(long, value_enum, env = "LOG4SHIELD_FORMAT", default_value = "text")]
    pub format: Format,

    /// Fail (exit 1) when a finding scores at or above this value.
    #[arg(long, env = "LOG4SHIELD_THRESHOLD", default_value = "0.0", value_parser = parse_threshold)]
    pub threshold: Score,

    /// Drop 1.x class-specific CVEs that only have version evidence.
    #[arg(long, env = "LOG4SHIELD_STRICT")]
    pub strict: bool,

    /// Glob of paths to skip, relative to the root. Repeatable.
    #[arg(long = "ignore", value_name = "GLOB")]
    pub ignore: Vec<String>,

    /// Artifact id to disregard even though it contains "log4j". Repeatable.
    #[arg(long = "exclude-artifact", value_name = "ARTIFACT")]
    pub exclude_artifact: Vec<String>,

    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub kb: KbSource,
}

#[derive(Debug, Args)]
pub struct KbArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,

    #[command(flatten)]
    pub kb: KbSource,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,

    #[arg(long)]
    pub strict: bool,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub kb: KbSource,
}

fn parse_threshold(s: &str) -> Result<Score, String> {
    s.parse()
}

fn load_kb(source: &KbSource) -> Result<KnowledgeBase, Error> {
    match &source.kb {
        Some(path) => KnowledgeBase::load(path),
        None => Ok(KnowledgeBase::embedded().clone()),
    }
}

fn emit(body: &[u8], output: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, body).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(body)
            .and_then(|_| stdout.flush())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Renders the knowledge base as a two-column table in file order.
pub fn render_kb(kb: &KnowledgeBase, format: Format) -> Vec<u8> {
    match format {
        Format::Text => {
            let width = kb
                .kb_contents()
                .iter()
                .map(|r| r.id.len())
                .max()
                .unwrap_or(0)
                .max("CVE Identifier".len());
            let mut out = format!("{:<width$}  Score\n", "CVE Identifier");
            for r in kb.kb_contents() {
                out.push_str(&format!("{:<width$}  {:>5}\n", r.id, r.base_score.to_string()));
            }
            out.into_bytes()
        }
        Format::Json => {
            let rows: Vec<_> = kb
                .kb_contents()
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "id": r.id,
                        "score": r.base_score,
                        "affected": r.affected.as_ref().map(|a| a.to_string()),
                        "patterns": r.patterns,
                        "recommendation": r.recommendation,
                    })
                })
                .collect();
            let mut body = serde_json::to_vec_pretty(&rows).expect("kb serializes");
            body.push(b'\n');
            body
        }
    }
}

fn colorize(text: &str) -> String {
    text.replacen("verdict: NOT VULNERABLE", "verdict: \x1b[32mNOT VULNERABLE\x1b[0m", 1)
        .replacen("verdict: VULNERABLE", "verdict: \x1b[31mVULNERABLE\x1b[0m", 1)
}

fn scan(args: ScanArgs, stdout: &mut dyn Write, styled: bool) -> Result<i32, Error> {
    let kb = load_kb(&args.kb)?;
    let config = ScanConfig {
        strict: args.strict,
        threshold: args.threshold,
        filter: ScanFilter {
            ignore_globs: args.ignore,
            ..ScanFilter::default()
        },
        pom: PomOptions {
            excluded_artifacts: args.exclude_artifact,
        },
    };
    let report = run_scan(&args.root, &config, &kb)?;
    let rendered = render(&report, args.format);
    if styled && args.format == Format::Text && args.output.is_none() {
        emit(colorize(rendered.as_str()).as_bytes(), None, stdout)?;
    } else {
        emit(&rendered.body, args.output.as_ref(), stdout)?;
    }
    Ok(exit_code(&report, config.threshold))
}

fn eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<i32, Error> {
    let kb = load_kb(&args.kb)?;
    let manifest = CorpusManifest::load(&args.manifest)?;
    let config = ScanConfig {
        strict: args.strict,
        ..ScanConfig::default()
    };
    let result = run_corpus(&manifest, &config, &kb);
    let body = render_eval(&result, args.format)?;
    emit(&body, args.output.as_ref(), stdout)?;
    Ok(EXIT_CLEAN)
}

/// Runs the CLI with explicit streams and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };

    let styled = std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
    let result = match cli.command {
        Command::Scan(args) => scan(args, stdout, styled),
        Command::Kb(args) => load_kb(&args.kb).and_then(|kb| {
            emit(&render_kb(&kb, args.format), None, stdout)?;
            Ok(EXIT_CLEAN)
        }),
        Command::Eval(args) => eval(args, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "log4shield: error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("log4shield").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn kb_table() {
        let (code, out, _) = run_capture(&["kb"]);
        assert_eq!(code, 0);
        let rows: Vec<_> = out.lines().skip(1).collect();
        assert_eq!(rows.len(), 11);
        assert!(rows[0].ends_with("10.0"));
        assert!(rows[10].starts_with("Potential misconfiguration") && rows[10].ends_with("5.0"));
    }

    #[test]
    fn bad_flags_exit_2() {
        let (code, out, err) = run_capture(&["scan", "--bogus"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
        let (code, _, _) = run_capture(&["scan", "--root", ".", "--threshold", "11"]);
        assert_eq!(code, 2);
        let (code, _, _) = run_capture(&[]);
        assert_eq!(code, 2);
    }

    #[test]
    fn missing_root_exit_2() {
        let (code, out, err) = run_capture(&["scan", "--root", "/definitely/not/here"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("no such path"));
    }

    #[test]
    fn help_is_not_an_error() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("scan"));
    }
}
