//! Plain CSV tables with fixed numeric formatting.

use serde::Serialize;

/// Formats like C's `%.12g`.
pub fn fmt_g12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    // Rounding can push the mantissa to 10, so take the exponent from the
    // formatted string.
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if exp < -5 || exp >= DIGITS {
        let (mant, e) = sci.split_once('e').unwrap();
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn append(&mut self, other: CsvTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_formatting() {
        assert_eq!(fmt_g12(0.25), "0.25");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_g12(12.0), "12");
        assert_eq!(fmt_g12(-0.5), "-0.5");
        assert_eq!(fmt_g12(1.5e-7), "1.5e-7");
        assert_eq!(fmt_g12(0.99999999999999), "1");
        assert_eq!(fmt_g12(123456789012345.0), "1.23456789012e14");
    }

    #[test]
    fn csv_has_header() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec!["1".into(), fmt_g12(0.5)]);
        assert_eq!(t.to_csv_string(), "a,b\n1,0.5\n");
    }
}
