use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrices::fmt_f64;

use super::config::RunConfig;

/// Named numeric table; one CSV header row, `nan` for missing cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    /// `{"columns": [...], "rows": [[...]]}` with `null` for NaN.
    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Vec<Option<f64>>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect())
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "columns": self.columns,
            "rows": rows,
        }))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Missing,
    Unstable,
}

impl CellStatus {
    pub fn of<T>(r: &Result<T>) -> Self {
        match r {
            Ok(_) => CellStatus::Ok,
            Err(Error::Unstable { .. }) => CellStatus::Unstable,
            Err(_) => CellStatus::Missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub table: String,
    pub cell: String,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellRecord {
    pub fn from_result<T>(table: &str, cell: String, r: &Result<T>) -> Self {
        Self {
            table: table.to_string(),
            cell,
            status: CellStatus::of(r),
            error: r.as_ref().err().map(|e| e.to_string()),
        }
    }
}

/// Everything a command produced before it is written out.
#[derive(Debug, Clone, Default)]
pub struct Emission {
    pub tables: Vec<Table>,
    pub cells: Vec<CellRecord>,
}

impl Emission {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn extend(&mut self, other: Emission) {
        self.tables.extend(other.tables);
        self.cells.extend(other.cells);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub wall_clock_s: f64,
    pub cells: Vec<CellRecord>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn missing_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.status != CellStatus::Ok).count()
    }
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<FileEntry>) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    files.push(FileEntry {
        path: name.to_string(),
        bytes: contents.len() as u64,
        sha256: sha256_hex(contents.as_bytes()),
    });
    Ok(())
}

/// Write every table (CSV and/or JSON per the config) plus `manifest.json`
/// into the configured directory.
pub fn write_emission(command: &str, cfg: &RunConfig, em: &Emission, started: Instant) -> Result<RunManifest> {
    let dir: PathBuf = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut files = vec![];
    for t in &em.tables {
        if cfg.output.csv {
            write_file(&dir, &format!("{}.csv", t.name), &t.to_csv(), &mut files)?;
        }
        if cfg.output.json {
            write_file(&dir, &format!("{}.json", t.name), &t.to_json()?, &mut files)?;
        }
    }
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        wall_clock_s: started.elapsed().as_secs_f64(),
        cells: em.cells.clone(),
        files,
    };
    std::fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![0.1, f64::NAN]);
        assert_eq!(t.to_csv(), "a,b\n1.0000000000000001e-1,nan\n");
        assert!(t.to_json().unwrap().contains("null"));
        assert_eq!(t.column("b").unwrap().len(), 1);
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn status_mapping() {
        let u: Result<()> = Err(Error::Unstable { max_re: 1.0 });
        let m: Result<()> = Err(Error::StabilityPole);
        assert_eq!(CellStatus::of(&u), CellStatus::Unstable);
        assert_eq!(CellStatus::of(&m), CellStatus::Missing);
        assert_eq!(CellStatus::of(&Ok::<_, Error>(1)), CellStatus::Ok);
    }
}
