//! Decimal output with 12 significant digits (C's `%.12g`).

/// Formats `x` like `printf("%.12g", x)`.
pub fn g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Comma-joined [`g12`] values.
pub fn join(values: &[f64]) -> String {
    values.iter().map(|&v| g12(v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::g12;

    #[test]
    fn matches_printf() {
        let cases = [
            (0.25, "0.25"),
            (1.0, "1"),
            (1.0 / 3.0, "0.333333333333"),
            (123456.789, "123456.789"),
            (1e-5, "1e-05"),
            (0.0001234, "0.0001234"),
            (2.5e15, "2.5e+15"),
            (999999999999.0, "999999999999"),
            (-0.5, "-0.5"),
            (0.0, "0"),
            (0.367993051302231, "0.367993051302"),
            // rounding carries into the exponent
            (9.9999999999999e-5, "0.0001"),
        ];
        for (x, want) in cases {
            assert_eq!(g12(x), want, "{x}");
        }
    }
}
