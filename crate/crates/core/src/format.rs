//! Number formatting shared by the CSV writers.

/// Nine significant digits in scientific notation; NaN renders as the empty field.
pub fn sig9(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.8e}")
    }
}
