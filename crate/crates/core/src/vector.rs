//! Small dense-vector helpers shared by every solver in this crate.
//!
//! All norms are max-abs (the `l∞` norm); that is the metric in which the
//! reflection operator is a contraction, so it is used consistently for
//! stopping rules, error reports and bound checks.

/// Componentwise positive part `[v]^+ = max(v, 0)`, allocating the result.
pub fn positive_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Componentwise positive part written into a caller-provided buffer.
///
/// Panics if the buffers disagree in length.
pub fn positive_part_into(v: &[f64], out: &mut [f64]) {
    assert_eq!(v.len(), out.len(), "positive_part_into: length mismatch");
    for (o, &x) in out.iter_mut().zip(v) {
        *o = x.max(0.0);
    }
}

/// Max-abs norm `max_j |v_j|`. Returns 0 for the empty slice.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// `sup_norm(a - b)` without building the difference vector.
///
/// Panics if the slices disagree in length.
pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "sup_norm_diff: length mismatch");
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (&x, &y)| m.max((x - y).abs()))
}

/// True when every component is `>= 0` (membership in the closed orthant).
pub fn in_orthant(v: &[f64]) -> bool {
    v.iter().all(|&x| x >= 0.0)
}

/// True when every component is a finite number (no NaN, no infinities).
pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Componentwise maximum `max(a, b)` written into `a`.
pub fn max_into(a: &mut [f64], b: &[f64]) {
    assert_eq!(a.len(), b.len(), "max_into: length mismatch");
    for (x, &y) in a.iter_mut().zip(b) {
        *x = x.max(y);
    }
}
