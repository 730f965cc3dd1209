//! Deterministic float formatting shared by file outputs.

/// Render with 17 significant digits so every f64 round-trips exactly.
/// Infinities print as `inf` / `-inf`.
pub fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Inverse of [`fmt_float`].
pub fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}
