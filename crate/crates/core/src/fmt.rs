//! Fixed float formatting for CSV artifacts.
//!
//! Every float written to a table goes through [`sig6`] so artifacts are
//! byte-identical across runs and platforms.

/// Formats `x` with six significant digits, `%g` style, rounding half to even.
///
/// Trailing zeros are dropped. Exponent notation is used when the decimal
/// exponent is below -4 or at least 6.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // `{:.5e}` rounds the exact binary value half-to-even.
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    if !(-4..6).contains(&exp) {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        trim_fraction(&mut m);
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{esign}{:02}", exp.abs());
    }

    let mut out = if exp >= 0 {
        let int_len = exp as usize + 1;
        format!("{}.{}", &digits[..int_len], &digits[int_len..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    trim_fraction(&mut out);
    format!("{sign}{out}")
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
}

/// Formats a p-value to four decimals; anything below 5e-5 prints as `0`.
pub fn p_value(p: f64) -> String {
    if p.is_nan() {
        return "NaN".to_string();
    }
    if p < 5e-5 {
        return "0".to_string();
    }
    format!("{:.4}", p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_range() {
        assert_eq!(sig6(16.93), "16.93");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(10.0), "10");
        assert_eq!(sig6(-2.25), "-2.25");
        assert_eq!(sig6(123456.4), "123456");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn exponent_range() {
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.00001), "1e-05");
        assert_eq!(sig6(999999.5), "1e+06");
    }

    #[test]
    fn half_even_on_exact_ties() {
        assert_eq!(sig6(2.5e-5), "2.5e-05");
        assert_eq!(sig6(1000000.5), "1e+06");
        assert_eq!(sig6(100000.25), "100000");
        assert_eq!(sig6(100000.75), "100001");
        assert_eq!(sig6(100000.5), "100000");
        assert_eq!(sig6(100001.5), "100002");
    }

    #[test]
    fn specials() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(f64::NAN), "NaN");
        assert_eq!(sig6(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn p_values() {
        assert_eq!(p_value(0.0), "0");
        assert_eq!(p_value(4.9e-5), "0");
        assert_eq!(p_value(0.7431), "0.7431");
        assert_eq!(p_value(0.0003), "0.0003");
    }
}
