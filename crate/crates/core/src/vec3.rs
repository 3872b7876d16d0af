//! Minimal fixed-size 3-vector arithmetic on `[f64; 3]`.

pub type Vec3 = [f64; 3];

pub const ZERO: Vec3 = [0.0; 3];
pub const E1: Vec3 = [1.0, 0.0, 0.0];
pub const E2: Vec3 = [0.0, 1.0, 0.0];
pub const E3: Vec3 = [0.0, 0.0, 1.0];

#[inline(always)]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline(always)]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline(always)]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline(always)]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline(always)]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline(always)]
pub fn norm(a: Vec3) -> f64 {
    norm_sq(a).sqrt()
}

/// `a + s * b`
#[inline(always)]
pub fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn max_abs_diff(a: Vec3, b: Vec3) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs()).max((a[2] - b[2]).abs())
}
