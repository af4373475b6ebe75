//! Number formatting shared by CSV files and the summary table.

/// `x` with `sig` significant digits in the style of C's `%g`: fixed
/// notation for decimal exponents in `[-4, sig)`, scientific otherwise,
/// trailing zeros removed.
pub fn format_sig(x: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= sig as i32 {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exponent.abs())
    } else {
        let decimals = (sig as i32 - 1 - exponent) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The CSV number format: 12 significant digits.
pub fn num(x: f64) -> String {
    format_sig(x, 12)
}

/// Accumulates a `\n`-terminated CSV document.
#[derive(Debug, Clone, Default)]
pub struct CsvWriter {
    text: String,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        let mut w = Self::default();
        w.line(header.iter().map(|h| h.to_string()));
        w
    }

    pub fn line<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(&f);
            first = false;
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(2.0 / 3.0), "0.666666666667");
        assert_eq!(num(1e-5), "1e-05");
        assert_eq!(num(0.000123456), "0.000123456");
        assert_eq!(num(123456789012345.0), "1.23456789012e+14");
        assert_eq!(num(999999999999.9), "1e+12");
        assert_eq!(num(100.0), "100");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0012345, 3), "0.00123");
        assert_eq!(format_sig(0.01996, 3), "0.02");
    }

    #[test]
    fn csv_lines() {
        let mut w = CsvWriter::new(&["t", "value"]);
        w.line([num(0.0), num(1.0)]);
        assert_eq!(w.finish(), "t,value\n0,1\n");
    }
}
