//! CSV tables and the run manifest, written atomically.
//!
//! Floats use Rust's shortest round-trip formatting, so identical runs give
//! identical bytes.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Version of the CSV column contracts; bumped on any schema change.
pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &target).with_context(|| format!("renaming into {}", target.display()))?;
    Ok(target)
}

/// An in-memory CSV table with a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer, width: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        anyhow::ensure!(fields.len() == self.width, "row has {} fields, header has {}", fields.len(), self.width);
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {}", e.error()))
    }

    pub fn write(self, dir: &Path, name: &str) -> Result<PathBuf> {
        write_atomic(dir, name, &self.into_bytes()?)
    }
}

/// Formats a value for a CSV cell.
pub fn cell(v: impl Display) -> String {
    v.to_string()
}

pub fn opt_cell<T: Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Space-separated ids.
pub fn ids_cell(ids: &[usize]) -> String {
    ids.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(" ")
}

/// Flat `key=value` manifest, one entry per line, in insertion order.
#[derive(Debug, Default, Clone)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        let mut m = Self::default();
        m.set("schema_version", SCHEMA_VERSION);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
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
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        write_atomic(dir, "manifest.txt", self.render().as_bytes())
    }
}
