//! C-style `%g` float formatting.
//!
//! CSV and MatrixMarket output is pinned to `%.17g`, which round-trips every
//! f64 and matches what a C harness would print, so emitted files can be
//! compared byte-for-byte across implementations.

/// Format like C's `printf("%.17g", x)`.
pub fn g17(x: f64) -> String {
    g(x, 17)
}

/// Format like C's `printf("%.*g", prec, x)`.
pub fn g(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf" } else { "inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let p = prec.max(1);
    // Decimal exponent of the value after rounding to p significant digits.
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp_str) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp_str.parse().expect("exponent");
    if exp >= -4 && exp < p as i32 {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_trailing_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = strip_trailing_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exp.abs())
    }
}

fn strip_trailing_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    // Expected strings are frozen from glibc printf("%.17g", ...).
    #[test]
    #[allow(clippy::excessive_precision)]
    fn matches_c_printf() {
        let cases: &[(f64, &str)] = &[
            (0.0, "0"),
            (-0.0, "-0"),
            (1.0, "1"),
            (-1.0, "-1"),
            (0.5, "0.5"),
            (0.25, "0.25"),
            (1.0 / 3.0, "0.33333333333333331"),
            (100.0, "100"),
            (12345.0, "12345"),
            (1e16, "10000000000000000"),
            (1e17, "1e+17"),
            (123456789012345680.0, "1.2345678901234568e+17"),
            (1e-4, "0.0001"),
            (9.9999999999999998e-05, "9.9999999999999991e-05"),
            (1e-5, "1.0000000000000001e-05"),
            (std::f64::consts::PI, "3.1415926535897931"),
            (2.2204460492503131e-16, "2.2204460492503131e-16"),
            (std::f64::consts::TAU, "6.2831853071795862"),
            (1e300, "1.0000000000000001e+300"),
            (-2.5e-300, "-2.5e-300"),
            (0.1, "0.10000000000000001"),
            (1024.0, "1024"),
            (f64::MIN_POSITIVE * f64::EPSILON, "4.9406564584124654e-324"),
            (f64::INFINITY, "inf"),
            (f64::NEG_INFINITY, "-inf"),
        ];
        for &(x, want) in cases {
            assert_eq!(g17(x), want, "formatting {x:e}");
        }
        assert_eq!(g17(f64::NAN), "nan");
    }

    #[test]
    fn round_trips_f64() {
        let mut rng = crate::rng::SplitMix64::new(99);
        for _ in 0..2000 {
            let x = rng.symmetric() * 10f64.powi((rng.next_f64() * 40.0 - 20.0) as i32);
            let s = g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x:e} -> {s}");
        }
    }
}
