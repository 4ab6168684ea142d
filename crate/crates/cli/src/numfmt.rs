//! Decimal formatting for the text outputs.

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`: fixed notation for
/// decimal exponents in `[-5, digits)`, scientific otherwise, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    assert!(digits > 0);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
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
    fn general_format() {
        assert_eq!(sig(0.0, 9), "0");
        assert_eq!(sig(1.0, 9), "1");
        assert_eq!(sig(0.5, 9), "0.5");
        assert_eq!(sig(0.468995593589281, 9), "0.468995594");
        assert_eq!(sig(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(sig(123456789.4, 9), "123456789");
        assert_eq!(sig(1234567890.0, 9), "1.23456789e9");
        assert_eq!(sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(sig(-0.25, 9), "-0.25");
        assert_eq!(sig(0.99999999999, 9), "1");
        assert_eq!(sig(f64::INFINITY, 9), "inf");
    }

    #[test]
    fn reparses_within_precision() {
        for &x in &[0.1234567891234, 3.0e-12, 98765.4321, 1.0 - 1e-12] {
            let back: f64 = sig(x, 9).parse().unwrap();
            assert!((back - x).abs() <= 5e-9 * x.abs());
        }
    }
}
