//! Report files. Everything is written to a temporary sibling and renamed
//! into place, and every CSV opens with `#` lines naming the config hash and
//! seed.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{HarnessError, Result};

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| HarnessError::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(HarnessError::io(path, e));
    }
    Ok(())
}

/// What every output file says about where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comments(&self, title: &str) -> Vec<String> {
        vec![title.to_string(), format!("config_hash={}", self.config_hash), format!("seed={}", self.seed)]
    }
}

/// A small in-memory CSV table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"));
        out
    }

    /// Parses a CSV written by [`Table::to_csv`], skipping comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| HarnessError::Validation(e.to_string()))?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(Table { header, rows })
    }

    /// Fixed-width text rendering.
    pub fn pretty(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| self.rows.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        for r in &self.rows {
            out.push('\n');
            out.push_str(&line(r));
        }
        out.push('\n');
        out
    }
}

/// Rate formatting shared by every report: shortest round-trip decimal.
pub fn num(v: f64) -> String {
    v.to_string()
}

/// Flat `key=value` run manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Manifest { entries }
    }
}

/// An output directory that remembers what it wrote.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub provenance: Provenance,
    written: Vec<(String, String)>,
}

impl OutputDir {
    pub fn new(root: PathBuf, provenance: Provenance) -> Self {
        OutputDir { root, provenance, written: Vec::new() }
    }

    pub fn write_table(&mut self, name: &str, title: &str, table: &Table) -> Result<PathBuf> {
        self.write_text(name, &table.to_csv(&self.provenance.comments(title)))
    }

    /// Writes a file that already carries its comment header.
    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, text.as_bytes())?;
        self.written.push((name.to_string(), hex::encode(Sha256::digest(text.as_bytes()))));
        Ok(path)
    }

    /// `(file name, sha-256)` of everything written so far.
    pub fn written(&self) -> &[(String, String)] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let names: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn table_round_trips_through_csv() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let prov = Provenance { config_hash: "abc".into(), seed: 3 };
        let text = t.to_csv(&prov.comments("demo"));
        assert!(text.starts_with("# demo\n# config_hash=abc\n# seed=3\na,b\n"));
        assert_eq!(Table::parse(&text).unwrap(), t);
        assert!(t.pretty().contains("x,y"));
    }

    #[test]
    fn manifest_keeps_insertion_order_and_overwrites() {
        let mut m = Manifest::default();
        m.set("b", 1);
        m.set("a", "x");
        m.set("b", 2);
        assert_eq!(m.render(), "b=2\na=x\n");
        assert_eq!(Manifest::parse(&m.render()), m);
    }
}
