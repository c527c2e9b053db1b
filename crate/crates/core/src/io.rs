//! Fixed-format CSV and JSON emission (17 significant digits).

use std::str::FromStr;

use serde_json::{Number, Value};

/// `x` with 17 significant digits; `NaN`/`inf` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number carrying the 17-digit text verbatim; non-finite values map to `null`.
pub fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&fmt_f64(x)).map(Value::Number).unwrap_or(Value::Null)
}

pub fn json_nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_num(x)).collect())
}

/// Comma-separated text with a header row and LF line endings.
pub fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        let x = 0.1 + 0.2;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(serde_json::to_string(&json_num(x)).unwrap(), s);
        assert_eq!(json_num(f64::NAN), Value::Null);
    }

    #[test]
    fn csv_layout() {
        let t = csv(&["a", "b"], [[1.0, 2.0]]);
        assert_eq!(t, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
