//! Lossless number formatting for CSV output.

/// Shortest representation that parses back to the same `f64`, in exponent
/// form outside `[1e-5, 1e16)` so tiny coordinates stay readable.
pub fn number(v: f64) -> String {
    let m = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&m) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Comma-joined [`number`]s followed by a newline.
pub fn row(values: &[f64]) -> String {
    let mut s = values.iter().map(|&v| number(v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}
