//! Fixed numeric formatting shared by every text output.

/// Formats `x` with 15 significant digits.
///
/// Values with a decimal exponent in `-5..15` are written in positional
/// notation with trailing zeros dropped, everything else in scientific
/// notation. Negative zero prints as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        // rounding can carry into a new digit; that still has at most 15 significant digits
        trim_zeros(s)
    } else {
        format!("{:.14e}", x)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}
