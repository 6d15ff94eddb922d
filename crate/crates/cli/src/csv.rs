//! CSV text with floats at 9 significant digits.

/// `v` with 9 significant digits; fixed notation for moderate magnitudes,
/// scientific otherwise, trailing zeros trimmed.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Header plus rows, comma separated, newline terminated.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s += &r.join(",");
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(-2.5), "-2.5");
        assert_eq!(fmt_f64(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_f64(123456.789012), "123456.789");
        assert_eq!(fmt_f64(1.0 / 3.0 * 1e-3), "0.000333333333");
        assert_eq!(fmt_f64(1.234567891234e-9), "1.23456789e-9");
        assert_eq!(fmt_f64(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_f64(0.1 + 0.2), "0.3");
    }

    #[test]
    fn round_trip_within_precision() {
        for v in [1e-12, -3.7e-4, 0.5, 17.25, 9.99999999e8, 1.5e10] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert!((back - v).abs() <= 5e-9 * v.abs(), "{v} -> {back}");
        }
    }

    #[test]
    fn table_layout() {
        let t = table(&["a".into(), "b".into()], &[vec!["1".into(), "2".into()]]);
        assert_eq!(t, "a,b\n1,2\n");
    }
}
