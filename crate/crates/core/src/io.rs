//! Text output helpers shared by the report writers.

/// Scientific notation with 17 significant digits and `.` as separator;
/// round-trips every finite `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Joins values as one CSV row.
pub fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(",")
}
