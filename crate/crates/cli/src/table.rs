//! Fixed-schema result tables and their CSV form.
//!
//! A CSV starts with `# key: value` metadata lines followed by a header row
//! and the data rows. Reals use Rust's shortest round-trip formatting, so the
//! same table always serializes to the same bytes.

use std::io::Write;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    /// Always finite; see [`Cell::real`].
    Real(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    /// Non-finite values become empty cells.
    pub fn real(x: f64) -> Cell {
        if x.is_finite() {
            Cell::Real(x)
        } else {
            Cell::Empty
        }
    }

    pub fn opt_real(x: Option<f64>) -> Cell {
        x.map_or(Cell::Empty, Cell::real)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Real(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered `(key, value)` pairs written ahead of the header.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        debug_assert!(row.iter().all(|c| !matches!(c, Cell::Real(x) if !x.is_finite())));
        self.rows.push(row);
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::Schema(format!("table {} has no column {name}", self.name)))
    }

    /// Numeric view of one column; non-numeric cells are `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let i = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn texts(&self, name: &str) -> Result<Vec<String>> {
        let i = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[i].render()).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let csv_err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_metadata_header_and_fixed_columns() {
        let mut t = ResultTable::new("demo", &["b", "crb_rad2", "solver_status"]).with_meta("seed", 7);
        t.push(vec![Cell::Int(2), Cell::real(0.125), Cell::Text("optimal".into())]);
        t.push(vec![Cell::Int(4), Cell::real(f64::INFINITY), Cell::Text("a,b".into())]);
        assert_eq!(
            t.to_csv_string(),
            "# seed: 7\nb,crb_rad2,solver_status\n2,0.125,optimal\n4,,\"a,b\"\n"
        );
        assert_eq!(t.numbers("crb_rad2").unwrap(), vec![Some(0.125), None]);
        assert!(t.column("rate_kbps").is_err());
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn rows_must_match_the_schema() {
        let mut t = ResultTable::new("demo", &["a", "b"]);
        t.push(vec![Cell::Int(1)]);
    }
}
