//! Decimal formatting shared by every CSV and dump writer.
//!
//! Numbers are written like C's `%.12g`: 12 significant digits, trailing zeros
//! removed, scientific notation when the decimal exponent is below -4 or at
//! least 12. Integral values print without a decimal point.

/// Formats `x` with 12 significant digits (`%.12g`).
pub fn sig12(x: f64) -> String {
    sig(x, 12)
}

/// Formats `x` with `digits` significant digits, `%g` style.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let digits = digits.max(1);
    // Rounding happens once, in the exponential rendering; the exponent of the
    // rounded value decides the layout.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(2.9404), "2.9404");
        assert_eq!(sig12(0.144421583173), "0.144421583173");
        assert_eq!(sig12(0.1444215831732424), "0.144421583173");
        assert_eq!(sig12(3.133452189074248e-9), "3.13345218907e-09");
        assert_eq!(sig12(1e-5), "1e-05");
        assert_eq!(sig12(0.0001), "0.0001");
        assert_eq!(sig12(123456789012.0), "123456789012");
        assert_eq!(sig12(1234567890123.0), "1.23456789012e+12");
        assert_eq!(sig12(-0.5), "-0.5");
        assert_eq!(sig12(0.1 + 0.2), "0.3");
        assert_eq!(sig12(999999999999.5), "1e+12");
        assert_eq!(sig12(f64::NAN), "nan");
    }
}
