//! Small helpers for vectors on the unit sphere `S^{n-1}`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{norm, Real};

/// Tolerance on `‖u‖₂ - 1` accepted by routines that require unit vectors.
pub const UNIT_TOL: f64 = 1e-9;

pub fn check_unit<T: Real>(u: &[T]) -> Result<()> {
    let r = norm(u);
    if (r - T::one()).abs() > T::tol(UNIT_TOL) || !r.is_finite() {
        return Err(Error::NotUnit(r.to_f64_lossy()));
    }
    Ok(())
}

/// Rescales `v` to unit length. Fails on the zero vector.
pub fn normalize<T: Real>(v: &[T]) -> Option<Vec<T>> {
    let r = norm(v);
    if r > T::zero() && r.is_finite() {
        Some(v.iter().map(|&x| x / r).collect())
    } else {
        None
    }
}

/// Uniform draw on `S^{n-1}` via normalized Gaussians.
pub fn uniform<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    loop {
        let g: Vec<T> = (0..n).map(|_| T::standard_normal(rng)).collect();
        if let Some(u) = normalize(&g) {
            return u;
        }
    }
}

/// `(u + eps) / ‖u + eps‖`, `None` when the sum vanishes.
pub fn perturb<T: Real>(u: &[T], eps: &[T]) -> Option<Vec<T>> {
    let s: Vec<T> = u.iter().zip(eps).map(|(&a, &b)| a + b).collect();
    normalize(&s)
}

/// Gaussian random-walk step on the sphere with per-coordinate scale `sigma`.
pub fn gaussian_step<T: Real, R: Rng + ?Sized>(u: &[T], sigma: T, rng: &mut R) -> Vec<T> {
    loop {
        let eps: Vec<T> = u.iter().map(|_| sigma * T::standard_normal(rng)).collect();
        if let Some(v) = perturb(u, &eps) {
            return v;
        }
    }
}

/// Euclidean distance between two vectors of equal length.
pub fn distance<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        .sqrt()
}
