//! Minimal CSV tables with a metadata comment line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match self {
            Cell::Int(v) => *v as f64,
            Cell::Real(v) => *v,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Text of the leading `# ...` comment line.
    pub meta: String,
    /// When set, a trailing `# truncated: ...` comment is written.
    pub truncated: Option<String>,
}

impl CsvTable {
    pub fn new(header: &[&str], meta: impl Into<String>) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), meta: meta.into(), truncated: None }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::ShapeMismatch(format!("row has {} cells, header has {}", row.len(), self.header.len())));
        }
        if let Some(i) = row.iter().position(|c| !c.as_f64().is_finite()) {
            return Err(Error::NonFinite(format!("column `{}`", self.header[i])));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.meta);
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(v) => v.to_string(),
                    Cell::Real(v) => format_real(*v),
                })
                .collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        if let Some(reason) = &self.truncated {
            let _ = writeln!(s, "# truncated: {}", reason.replace('\n', " "));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    /// Parses text produced by [`CsvTable::render`]. Integer-looking cells become `Int`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = String::new();
        let mut truncated = None;
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(c) = line.strip_prefix("# ") {
                match c.strip_prefix("truncated: ") {
                    Some(r) => truncated = Some(r.to_string()),
                    None => meta = c.to_string(),
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match &header {
                None => header = Some(line.split(',').map(str::to_string).collect()),
                Some(h) => {
                    let cells = line
                        .split(',')
                        .map(|c| {
                            c.parse::<u64>()
                                .map(Cell::Int)
                                .or_else(|_| c.parse::<f64>().map(Cell::Real))
                                .map_err(|_| Error::ConfigInvalid(format!("bad CSV cell `{c}`")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if cells.len() != h.len() {
                        return Err(Error::ShapeMismatch("ragged CSV row".into()));
                    }
                    rows.push(cells);
                }
            }
        }
        let header = header.ok_or_else(|| Error::ConfigInvalid("CSV has no header".into()))?;
        Ok(Self { header, rows, meta, truncated })
    }
}
