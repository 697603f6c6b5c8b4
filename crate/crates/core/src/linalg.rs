//! Closed-form 2×2 symmetric eigendecomposition.

/// Eigen-decomposition of `[[a, b], [b, c]]`.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors.
pub fn sym2_eigen(a: f64, b: f64, c: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    let v1 = [co, s];
    let v2 = [-s, co];
    let l1 = a * co * co + 2.0 * b * co * s + c * s * s;
    let l2 = a * s * s - 2.0 * b * co * s + c * co * co;
    if l1 >= l2 {
        ([l1, l2], [v1, v2])
    } else {
        ([l2, l1], [v2, v1])
    }
}

/// Inverse of `[[a, b], [b, c]]` as `(a', b', c')`, or `None` when singular.
pub fn sym2_inverse(a: f64, b: f64, c: f64) -> Option<(f64, f64, f64)> {
    let det = a * c - b * b;
    let scale = a.abs().max(c.abs()).max(b.abs());
    if det == 0.0 || !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some((c / det, -b / det, a / det))
}
