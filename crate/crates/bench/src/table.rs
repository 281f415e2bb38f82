//! Plain comma-separated tables with a header row. Fields never contain commas.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{read_text, write_text, BenchError, Result};

/// Columns left out of the reproducibility digest.
pub const TIMING_COLUMNS: [&str; 1] = ["wall_time"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => return Err(BenchError::MissingArtifact(path.to_path_buf())),
        };
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(BenchError::Malformed {
                    path: path.to_path_buf(),
                    msg: format!("row {} has {} fields, header has {}", i + 1, row.len(), header.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    /// SHA-256 over the rendered table without the timing columns.
    pub fn digest(&self) -> String {
        let keep: Vec<usize> = (0..self.header.len())
            .filter(|&i| !TIMING_COLUMNS.contains(&self.header[i].as_str()))
            .collect();
        let mut h = Sha256::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let line: Vec<&str> = keep.iter().map(|&i| row[i].as_str()).collect();
            h.update(line.join(",").as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Typed access to one row of a parsed table.
pub struct RowView<'a> {
    pub table: &'a Table,
    pub index: usize,
}

impl RowView<'_> {
    pub fn str(&self, col: &str) -> Option<&str> {
        self.table.column(col).map(|c| self.table.rows[self.index][c].as_str())
    }

    /// `None` for a missing column or an empty field.
    pub fn f64(&self, col: &str) -> Option<f64> {
        self.str(col).filter(|s| !s.is_empty()).and_then(|s| s.parse().ok())
    }

    pub fn usize(&self, col: &str) -> Option<usize> {
        self.str(col).and_then(|s| s.parse().ok())
    }

    pub fn flag(&self, col: &str) -> Option<bool> {
        match self.str(col)? {
            "1" => Some(true),
            "0" => Some(false),
            _ => None,
        }
    }
}

impl Table {
    pub fn views(&self) -> impl Iterator<Item = RowView<'_>> {
        (0..self.rows.len()).map(move |index| RowView { table: self, index })
    }
}
