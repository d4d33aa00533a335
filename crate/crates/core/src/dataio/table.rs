use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// `None` marks a missing cell.
    pub cells: Vec<Option<String>>,
}

impl RawColumn {
    pub fn numeric_values(&self) -> Vec<Option<f64>> {
        self.cells
            .iter()
            .map(|c| c.as_deref().and_then(|s| s.trim().parse().ok()))
            .collect()
    }
}

/// Untyped table as read from disk, before imputation and encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub n_rows: usize,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> RawTable {
        RawTable {
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn {
                    name: c.name.clone(),
                    kind: c.kind,
                    cells: idx.iter().map(|&i| c.cells[i].clone()).collect(),
                })
                .collect(),
            n_rows: idx.len(),
        }
    }

    /// Writes the table back as CSV; missing cells are written empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cells[i].as_deref().unwrap_or("")))?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv writer>".into(),
            source: e,
        })?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label: String,
    /// Cells equal to any of these (after trimming) are missing.
    pub missing_tokens: Vec<String>,
}

impl LoadOptions {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            missing_tokens: vec![String::new(), "?".into()],
        }
    }

    /// Replaces `?` with a custom token; the empty cell stays missing.
    pub fn with_missing_token(mut self, token: impl Into<String>) -> Self {
        self.missing_tokens = vec![String::new(), token.into()];
        self
    }
}

pub fn load_table(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_table(file, opts)
}

/// Parses CSV with a header row. Ragged rows are rejected.
pub fn parse_table<R: Read>(reader: R, opts: &LoadOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::Schema(format!("duplicate column name `{n}`")));
        }
    }
    if !names.contains(&opts.label) {
        return Err(Error::MissingLabel(opts.label.clone()));
    }
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            let t = field.trim();
            let missing = opts.missing_tokens.iter().any(|m| m == t);
            cells[j].push(if missing { None } else { Some(t.to_string()) });
        }
    }
    let n_rows = cells.first().map_or(0, Vec::len);
    if n_rows == 0 {
        return Err(Error::EmptyTable);
    }
    let columns = names
        .into_iter()
        .zip(cells)
        .map(|(name, cells)| {
            let numeric = cells
                .iter()
                .flatten()
                .all(|c| c.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false));
            RawColumn {
                name,
                kind: if numeric {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                },
                cells,
            }
        })
        .collect();
    Ok(RawTable { columns, n_rows })
}
