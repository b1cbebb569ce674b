//! Number rendering shared by every tabular output.
//!
//! Floats are written with 10 significant digits in the style of C's `%.10g`:
//! fixed notation when the decimal exponent is in `[-4, 10)`, scientific
//! otherwise, trailing zeros removed.

const SIG_DIGITS: i32 = 10;

/// Renders `x` with 10 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..SIG_DIGITS).contains(&exp) {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

/// Renders an optional value, `NA` when absent.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_else(|| "NA".to_string())
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(2.9019152640743), "2.901915264");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_sig(123456.0), "123456");
        assert_eq!(fmt_sig(1234567890.0), "1234567890");
        assert_eq!(fmt_sig(12345678901.0), "1.23456789e+10");
        assert_eq!(fmt_sig(5.22e-5), "5.22e-05");
        assert_eq!(fmt_sig(1.73e-4), "0.000173");
        assert_eq!(fmt_sig(9.99999999999), "10");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
    }

    #[test]
    fn optional_values() {
        assert_eq!(fmt_opt(None), "NA");
        assert_eq!(fmt_opt(Some(0.25)), "0.25");
    }
}
