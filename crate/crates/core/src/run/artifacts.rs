use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Fixed 17-significant-digit rendering used in every CSV cell.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Comma-separated table with LF line endings.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

pub enum Cell<'a> {
    F(f64),
    I(i64),
    S(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&fmt_f64(*x)),
                Cell::I(v) => write!(self.text, "{v}").unwrap(),
                Cell::S(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Outcome of one internal invariant.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: String,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, limit: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, limit: limit.into(), detail: String::new() }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, value, format!("<= {limit:e}"))
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one command run; `manifest.json` is written after every other
/// file.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactManifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    pub timings: Vec<Timing>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ArtifactManifest {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Fixed-width table of every check.
    pub fn summary_table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<w$}  {:<6}  {:>12}  limit\n", "check", "status", "value");
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(s, "{:<w$}  {:<6}  {:>12.4e}  {}", c.name, status, c.value, c.limit).unwrap();
        }
        let failed = self.failed_checks().count();
        writeln!(s, "{} checks, {} failed", self.checks.len(), failed).unwrap();
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

/// Collects emitted files, checks and timings for one output directory.
#[derive(Debug)]
pub struct ArtifactSink {
    pub dir: PathBuf,
    files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub timings: Vec<Timing>,
}

impl ArtifactSink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), checks: Vec::new(), timings: Vec::new() })
    }

    fn record(&mut self, path: PathBuf) {
        if !self.files.contains(&path) {
            self.files.push(path);
        }
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, text.as_bytes())?;
        self.record(path);
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        self.write_text(name, csv.as_str())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Registers files written by other code inside the directory.
    pub fn adopt(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            self.record(p);
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn finish(self, command: &str, config_sha256: String, seed: u64) -> Result<ArtifactManifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for p in &self.files {
            let bytes = std::fs::read(p)?;
            let rel = p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().replace('\\', "/");
            files.push(FileEntry { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let passed = self.checks.iter().all(|c| c.passed);
        let manifest = ArtifactManifest { command: command.into(), config_sha256, seed, files, timings: self.timings, checks: self.checks, passed };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits_and_lf() {
        let mut c = Csv::new(&["a", "b", "c"]);
        c.row(&[Cell::F(0.1), Cell::I(-3), Cell::S("x")]);
        assert_eq!(c.as_str(), "a,b,c\n1.0000000000000001e-1,-3,x\n");
        assert_eq!(fmt_f64(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_lists_files_and_is_written_last() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::new(dir.path()).unwrap();
        sink.write_text("b.csv", "x\n").unwrap();
        sink.write_json("a.json", &[1, 2]).unwrap();
        sink.push(Check::at_most("small", 2.0, 1.0));
        let m = sink.finish("test", "00".into(), 0).unwrap();
        assert_eq!(m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["a.json", "b.csv"]);
        assert!(!m.passed);
        assert_eq!(m.failed_checks().next().unwrap().name, "small");
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(text.contains("\"command\": \"test\""));
    }
}
