use crate::scalar::Scalar;

/// Formats a number with 17 significant digits so `f64` values survive a
/// text round trip bit-for-bit.
pub fn fmt_num<T: Scalar>(x: T) -> String {
    let v = x.as_f64();
    if v == 0.0 && v.is_sign_positive() {
        return "0".to_string();
    }
    format!("{v:.16e}")
}
