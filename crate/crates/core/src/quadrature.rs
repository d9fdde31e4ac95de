//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, bisecting at most
/// `max_depth` times along any branch.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T, max_depth: u32) -> Result<T> {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut worst = T::zero();
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth, &mut worst);
    if !v.is_finite() {
        return Err(Error::QuadratureFailed(f64::INFINITY));
    }
    if worst > T::zero() {
        return Err(Error::QuadratureFailed(worst.to_f64_lossy()));
    }
    Ok(v)
}

#[inline]
fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
    worst: &mut T,
) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (lm, rm) = ((a + m) / two, (m + b) / two);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let fifteen = T::lit(15.0);
    // Below round-off of the panel sum further refinement cannot help.
    let noise = T::epsilon() * T::lit(64.0) * (left.abs() + right.abs());
    if delta.abs() <= fifteen * tol || delta.abs() <= noise {
        return left + right + delta / fifteen;
    }
    if depth == 0 {
        *worst = worst.max(delta.abs() / fifteen);
        return left + right + delta / fifteen;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / two, depth - 1, worst)
        + recurse(f, m, b, fm, frm, fb, right, tol / two, depth - 1, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_functions() {
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-10, 30).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        let v = adaptive_simpson(|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-12, 30).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let r = adaptive_simpson(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, 1e-12, 4);
        assert!(matches!(r, Err(Error::QuadratureFailed(_))));
    }
}
