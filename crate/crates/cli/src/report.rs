//! Result files: CSV tables, a JSON summary, a one-page digest and the
//! checksummed manifest.
//!
//! Everything except the manifest is a pure function of the resolved spec, so
//! two runs with the same spec and seed produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use alpha_lattice::sim::format_float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = "1";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DIGEST_FILE: &str = "digest.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// One CSV file, `<name>.csv`, with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(io::Error::other)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io::Error::other)?;
        }
        w.into_inner().map_err(|e| io::Error::other(e.to_string()))
    }
}

/// A pass/fail comparison, tagged with where its reference comes from and how
/// much slack it was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// The number `value` is compared with.
    pub reference: f64,
    /// `<=`, `>=` or `|value - reference| <=`.
    pub relation: String,
    pub tolerance: f64,
    pub oracle: String,
    pub pass: bool,
}

impl Check {
    /// `value <= reference + tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, oracle: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            std_error: None,
            reference,
            relation: "<=".into(),
            tolerance,
            oracle: oracle.into(),
            pass: value <= reference + tolerance,
        }
    }

    /// `value >= reference - tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, oracle: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            std_error: None,
            reference,
            relation: ">=".into(),
            tolerance,
            oracle: oracle.into(),
            pass: value >= reference - tolerance,
        }
    }

    /// `|value - reference| <= tolerance`.
    pub fn close(name: impl Into<String>, value: f64, reference: f64, tolerance: f64, oracle: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            std_error: None,
            reference,
            relation: "|value - reference| <=".into(),
            tolerance,
            oracle: oracle.into(),
            pass: (value - reference).abs() <= tolerance,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }
}

/// Everything one command produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Command-specific structured results.
    pub details: serde_json::Value,
    pub advisories: Vec<String>,
    /// Extra artifacts written verbatim, by file name.
    pub files: Vec<(String, Vec<u8>)>,
    /// Set when the command stopped early; outputs written so far are kept.
    pub error: Option<String>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
    }
}

/// Run context recorded alongside the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub spec_hash: String,
    pub seed: u64,
    pub n_paths: u64,
    /// Resolved parameters, as in the spec.
    pub parameters: serde_json::Value,
}

#[derive(Serialize)]
struct Summary<'a> {
    artifact_version: &'a str,
    #[serde(flatten)]
    info: &'a RunInfo,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    pass: bool,
    n_checks: usize,
    failed: Vec<String>,
    checks: &'a [Check],
    advisories: &'a [String],
    tables: Vec<&'a str>,
    details: &'a serde_json::Value,
}

fn status(report: &Report) -> &'static str {
    if report.error.is_some() {
        "incomplete"
    } else {
        "complete"
    }
}

fn digest(info: &RunInfo, report: &Report) -> String {
    let mut s = String::new();
    let verdict = if report.pass() { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "alpha-lattice {}  [{verdict}]", info.command);
    let _ = writeln!(s, "spec   {}", info.spec_hash);
    let _ = writeln!(s, "seed   {}    paths {}", info.seed, info.n_paths);
    if let Some(e) = &report.error {
        let _ = writeln!(s, "error  {e}");
    }
    let _ = writeln!(s);
    for c in &report.checks {
        let se = c.std_error.map(|e| format!(" ± {e:.3e}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{} {}: {:.6e}{se} {} {:.6e} (tol {:.3e}; {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.reference,
            c.tolerance,
            c.oracle
        );
    }
    if report.checks.is_empty() {
        let _ = writeln!(s, "no checks");
    }
    for a in &report.advisories {
        let _ = writeln!(s, "note: {a}");
    }
    for t in &report.tables {
        let _ = writeln!(s, "table {}.csv: {} rows", t.name, t.rows.len());
    }
    s
}

/// Writes every table, `summary.json` and `digest.txt`; returns the written
/// files with their SHA-256, keyed by name.
pub fn emit_report(info: &RunInfo, report: &Report, out: &Path) -> io::Result<BTreeMap<String, String>> {
    fs::create_dir_all(out)?;
    let mut files = BTreeMap::new();
    let mut write = |name: &str, bytes: &[u8]| -> io::Result<()> {
        fs::write(out.join(name), bytes)?;
        files.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    };
    for t in &report.tables {
        write(&format!("{}.csv", t.name), &t.to_csv()?)?;
    }
    for (name, bytes) in &report.files {
        write(name, bytes)?;
    }
    let summary = Summary {
        artifact_version: ARTIFACT_VERSION,
        info,
        status: status(report),
        error: report.error.as_deref(),
        pass: report.pass(),
        n_checks: report.checks.len(),
        failed: report.failed(),
        checks: &report.checks,
        advisories: &report.advisories,
        tables: report.tables.iter().map(|t| t.name.as_str()).collect(),
        details: &report.details,
    };
    let mut json = serde_json::to_vec_pretty(&summary).map_err(io::Error::other)?;
    json.push(b'\n');
    write(SUMMARY_FILE, &json)?;
    write(DIGEST_FILE, digest(info, report).as_bytes())?;
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub spec_hash: String,
    pub seed: u64,
    /// File name to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub status: String,
    pub pass: bool,
    pub failed: Vec<String>,
    /// The fully resolved spec; running it again reproduces `outputs`.
    pub spec: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, out: &Path) -> io::Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(io::Error::other)?;
        json.push(b'\n');
        fs::write(out.join(MANIFEST_FILE), json)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// A manifest for the given outputs.
pub fn manifest(
    info: &RunInfo,
    report: &Report,
    outputs: BTreeMap<String, String>,
    spec: String,
    wall_clock_seconds: f64,
) -> RunManifest {
    RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        command: info.command.clone(),
        spec_hash: info.spec_hash.clone(),
        seed: info.seed,
        outputs,
        wall_clock_seconds,
        status: status(report).to_string(),
        pass: report.pass(),
        failed: report.failed(),
        spec,
        output_dir: None,
    }
}
