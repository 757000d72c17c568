//! Growing Cosine Unit.

/// g(u) = u cos u
#[inline]
pub fn gcu(u: f64) -> f64 {
    u * u.cos()
}

/// g'(u) = cos u - u sin u
#[inline]
pub fn gcu_derivative(u: f64) -> f64 {
    let (s, c) = u.sin_cos();
    c - u * s
}

/// Value and derivative with a single `sin_cos`.
#[inline]
pub(crate) fn gcu_with_derivative(u: f64) -> (f64, f64) {
    let (s, c) = u.sin_cos();
    (u * c, c - u * s)
}
