//! Number formatting shared by the text outputs.

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}
