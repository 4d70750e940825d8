//! Rectangular result tables and their CSV/JSON forms.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One table entry. Non-finite floats are stored as `Missing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn float(v: f64) -> Self {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Missing
        }
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::float)
    }

    pub fn flag(b: bool) -> Self {
        Cell::Int(b as i64)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(f) => Some(*f),
            _ => None,
        }
    }

    /// CSV text: 17 significant digits for floats, '.' decimal point.
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => format!("{f:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Config echo, versions and run summary.
    pub metadata: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), metadata: Value::Null }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, row)) = self.rows.iter().enumerate().find(|(_, r)| r.len() != self.columns.len()) {
            bail!("row {i} has {} cells, header has {}", row.len(), self.columns.len());
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::csv))?;
        }
        Ok(String::from_utf8(writer.into_inner()?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: Self = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }
}

/// Where the metadata of a CSV output goes.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Write the table; CSV gets a `<out>.meta.json` sidecar with the metadata,
/// JSON embeds it. Returns the paths written.
pub fn emit(table: &ResultTable, out: &Path, format: Format) -> Result<Vec<PathBuf>> {
    match format {
        Format::Csv => {
            fs::write(out, table.to_csv()?).with_context(|| format!("writing {}", out.display()))?;
            let meta = sidecar_path(out);
            let text = serde_json::to_string_pretty(&table.metadata)? + "\n";
            fs::write(&meta, text).with_context(|| format!("writing {}", meta.display()))?;
            Ok(vec![out.to_path_buf(), meta])
        }
        Format::Json => {
            fs::write(out, table.to_json()?).with_context(|| format!("writing {}", out.display()))?;
            Ok(vec![out.to_path_buf()])
        }
    }
}
