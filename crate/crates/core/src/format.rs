//! Fixed float formatting shared by every CSV writer.

/// Formats with 17 significant digits in scientific notation. The output
/// parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero out of the files
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

pub(crate) fn parse_f64(field: &str, line: usize) -> crate::Result<f64> {
    field.trim().parse::<f64>().map_err(|e| crate::Error::Parse {
        line,
        reason: format!("{field:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_has_one_spelling() {
        assert_eq!(fmt_f64(0.0), fmt_f64(-0.0));
    }

    proptest! {
        #[test]
        fn formatting_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = fmt_f64(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
