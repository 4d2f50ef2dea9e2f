//! Locale-independent numeric parsing.

/// Parses a finite decimal number written with a dot separator.
///
/// Rejects thousands separators, decimal commas, and the textual `inf`/`nan` forms that
/// `f64::from_str` would otherwise accept.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    let ok = s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    if !ok {
        return Err(format!("`{s}` is not a plain decimal number"));
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

/// Parses a `;`-separated list of numbers.
pub fn parse_number_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(';').map(parse_number).collect()
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_locale_and_specials() {
        for bad in ["1,5", "1 000", "inf", "NaN", "", "0x10", "1e999"] {
            assert!(parse_number(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_number(" -1.5e-3 ").unwrap(), -1.5e-3);
        assert_eq!(parse_number("+2").unwrap(), 2.0);
    }

    proptest! {
        #[test]
        fn format_round_trips(bits: u64) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back = parse_number(&format_number(v)).unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
