//! Plain-text output helpers shared by the library and the CLI.

use std::fmt::Write as _;

/// Lossless decimal rendering (17 significant digits).
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Minimal CSV table builder: fields are written verbatim, so callers must not
/// pass values containing commas or newlines.
#[derive(Clone, Debug)]
pub struct CsvTable {
    columns: usize,
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            columns: header.len(),
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn push(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn rows(&self) -> usize {
        self.text.lines().count() - 1
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn table_counts_rows() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(&["1".into(), "2".into()]);
        assert_eq!(t.rows(), 1);
        assert_eq!(t.as_str(), "a,b\n1,2\n");
    }
}
