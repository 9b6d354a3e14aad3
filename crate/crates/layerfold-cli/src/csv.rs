//! Deterministic CSV emission: header row, 17-significant-digit floats,
//! comma separator, LF line endings. Identical inputs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

pub enum Field {
    Float(f64),
    Int(u64),
    Bool(bool),
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

pub struct Table {
    text: String,
    columns: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[Field]) {
        assert_eq!(fields.len(), self.columns, "row width mismatch");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match f {
                // 17 significant digits round-trips every f64
                Field::Float(v) => write!(self.text, "{v:.16e}").unwrap(),
                Field::Int(v) => write!(self.text, "{v}").unwrap(),
                Field::Bool(v) => write!(self.text, "{v}").unwrap(),
            }
        }
        self.text.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let mut t = Table::new(&["x"]);
        let v = std::f64::consts::PI * 1e-7;
        t.row(&[v.into()]);
        let line = t.text.lines().nth(1).unwrap();
        assert_eq!(line.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn lines_end_with_lf_only() {
        let mut t = Table::new(&["a", "b"]);
        t.row(&[1.0.into(), true.into()]);
        assert!(!t.text.contains('\r'));
        assert!(t.text.ends_with('\n'));
    }
}
