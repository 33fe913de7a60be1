//! printf-style `%.<p>g` formatting and the CSV table writer.

/// Formats `x` like C's `%.<prec>g`.
pub fn fmt_g(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let p = prec.max(1);
    // Round to p significant digits first; the exponent of the rounded value
    // decides between fixed and scientific notation.
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Numeric table written as CSV: one `#` metadata line, a header, then rows
/// formatted with `%.12g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("#");
        for (k, v) in &self.metadata {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_g(x, 12)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::{fmt_g, Table};

    #[test]
    fn matches_printf() {
        assert_eq!(fmt_g(0.0, 12), "0");
        assert_eq!(fmt_g(1.0, 12), "1");
        assert_eq!(fmt_g(-0.75, 12), "-0.75");
        assert_eq!(fmt_g(0.1, 17), "0.10000000000000001");
        assert_eq!(fmt_g(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_g(123456789012345.0, 12), "1.23456789012e+14");
        assert_eq!(fmt_g(0.0001234, 12), "0.0001234");
        assert_eq!(fmt_g(0.00001234, 12), "1.234e-05");
        assert_eq!(fmt_g(999999999999.5, 12), "1e+12");
        assert_eq!(fmt_g(-2.5e-300, 12), "-2.5e-300");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 7.0, -3.141592653589793, 6.02214076e23, 1e-310] {
            let s = fmt_g(x, 17);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn table_csv_layout() {
        let mut t = Table::new(&["x", "y"]).with_meta("n", 3);
        t.rows.push(vec![0.5, 1.0 / 3.0]);
        assert_eq!(t.to_csv(), "# n=3\nx,y\n0.5,0.333333333333\n");
        assert_eq!(t.column("y"), Some(vec![1.0 / 3.0]));
        assert_eq!(t.column("z"), None);
    }
}
