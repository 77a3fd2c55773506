//! Plain-text result emission: CSV tables and a `key = value` report.
//!
//! Floats are written in their shortest round-trip form (`0.1`, `2.0`,
//! `1e-7`), rows end in `\n` and column order is fixed by the producer, so
//! equal inputs give byte-equal files.

use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::error::{Error, Result};

/// A scalar as it appears in a report or table cell.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_cell!(u64, usize, i64, bool, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

/// A header row and string cells, one row per record.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Domain(format!(
                "row has {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Appends a row of numbers.
    pub fn push_values(&mut self, values: &[f64]) -> Result<()> {
        self.push_row(values.iter().map(Cell::cell).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Named scalar results followed by an optional table.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Report {
    pub title: String,
    pub summary: Vec<(String, String)>,
    pub table: Option<Table>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Cell) {
        self.summary.push((key.into(), value.cell()));
    }

    /// Optional values are written as `none`.
    pub fn push_opt(&mut self, key: impl Into<String>, value: Option<impl Cell>) {
        match value {
            Some(v) => self.push(key, v),
            None => self.push(key, "none"),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The table when there is one, otherwise the summary as `key,value` rows.
    pub fn to_csv(&self) -> Result<String> {
        match &self.table {
            Some(t) => t.to_csv(),
            None => {
                let mut t = Table::new(["key", "value"]);
                for (k, v) in &self.summary {
                    t.push_row(vec![k.clone(), v.clone()])?;
                }
                t.to_csv()
            }
        }
    }

    pub fn to_structured_text(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "[{}]", self.title).map_err(fmt_err)?;
        for (k, v) in &self.summary {
            writeln!(out, "{k} = {v}").map_err(fmt_err)?;
        }
        if let Some(t) = &self.table {
            writeln!(out, "\n[{}.data]", self.title).map_err(fmt_err)?;
            out.push_str(&t.to_csv()?);
        }
        Ok(out)
    }
}

fn fmt_err(e: fmt::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_plain_and_stable() {
        let mut t = Table::new(["x", "y"]);
        t.push_values(&[0.1, 2.0]).unwrap();
        t.push_values(&[1e-7, -3.5]).unwrap();
        assert_eq!(t.to_csv().unwrap(), "x,y\n0.1,2.0\n1e-7,-3.5\n");
        assert!(t.push_values(&[1.0]).is_err());
    }

    #[test]
    fn structured_text_lists_summary_then_data() {
        let mut r = Report::new("demo");
        r.push("gain", 1.5);
        r.push_opt("limit_km", None::<f64>);
        assert_eq!(r.to_structured_text().unwrap(), "[demo]\ngain = 1.5\nlimit_km = none\n");
        assert_eq!(r.to_csv().unwrap(), "key,value\ngain,1.5\nlimit_km,none\n");
        r.table = Some(Table::new(["a"]));
        assert!(r.to_structured_text().unwrap().ends_with("[demo.data]\na\n"));
        assert_eq!(r.get("gain"), Some("1.5"));
    }
}
