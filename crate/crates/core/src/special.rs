//! Modified Bessel functions of the first kind, evaluated in log space.
//!
//! Small and moderate arguments use the ascending series
//! `I_ν(x) = (x/2)^ν Σ_k (x²/4)^k / (k! Γ(k+ν+1))`, which has only positive
//! terms and is summed with rescaling so it cannot overflow. Large arguments
//! use the Hankel expansion `I_ν(x) ~ eˣ / √(2πx) Σ_k (−1)^k a_k(ν) / x^k`,
//! accepted only if its terms fall below machine precision before they start
//! growing; otherwise the series is used.
//!
//! Orders `ν > −1` are supported (the vMF marginal needs `ν = −1/2` at n = 2).
//! Relative accuracy is about `1e-12` in `f64` on `ν ∈ [0, 30], x ∈ (0, 200]`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Below this argument the Hankel expansion cannot reach full precision.
const ASYMPTOTIC_MIN_X: f64 = 40.0;
const MAX_SERIES_TERMS: usize = 10_000;

fn check_order<T: Real>(nu: T) -> Result<()> {
    if !(nu > -T::one()) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("Bessel order must be > -1, got {nu}")));
    }
    Ok(())
}

/// `ln I_ν(x)`.
pub fn log_bessel_i<T: Real>(nu: T, x: T) -> Result<T> {
    check_order(nu)?;
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("Bessel argument must be >= 0, got {x}")));
    }
    if x == T::zero() {
        return if nu == T::zero() {
            Ok(T::zero())
        } else if nu > T::zero() {
            Ok(T::neg_infinity())
        } else {
            Err(Error::Overflow(format!("I_{nu}(0) is infinite")))
        };
    }
    if x > T::lit(ASYMPTOTIC_MIN_X).max(T::lit(2.0) * nu) {
        if let Some(v) = log_hankel(nu, x) {
            return Ok(v);
        }
    }
    Ok(nu * (x / T::lit(2.0)).ln() + log_series_sum(nu, x) - (nu + T::one()).ln_gamma())
}

/// `I_ν(x)`; errors if the value overflows the scalar type.
pub fn bessel_i<T: Real>(nu: T, x: T) -> Result<T> {
    let v = log_bessel_i(nu, x)?.exp();
    if v.is_infinite() {
        return Err(Error::Overflow(format!("I_{nu}({x})")));
    }
    Ok(v)
}

/// `ln(I_ν(z) / z^ν)`, finite at `z = 0` where it equals `−ν ln 2 − ln Γ(ν+1)`.
pub fn log_bessel_i_over_power<T: Real>(nu: T, z: T) -> Result<T> {
    check_order(nu)?;
    if z == T::zero() {
        return Ok(-nu * T::LN_2() - (nu + T::one()).ln_gamma());
    }
    Ok(log_bessel_i(nu, z)? - nu * z.ln())
}

/// Mean resultant length `A_n(κ) = I_{n/2}(κ) / I_{n/2−1}(κ)` of a vMF law on `S^{n-1}`.
pub fn mean_resultant_length<T: Real>(n: usize, kappa: T) -> Result<T> {
    let half = T::from_usize_lossy(n) / T::lit(2.0);
    Ok((log_bessel_i(half, kappa)? - log_bessel_i(half - T::one(), kappa)?).exp())
}

/// `ln Σ_k (x²/4)^k Γ(ν+1) / (k! Γ(k+ν+1))`.
fn log_series_sum<T: Real>(nu: T, x: T) -> T {
    let q = x * x / T::lit(4.0);
    let big = T::max_value().sqrt();
    let eps = T::epsilon() / T::lit(4.0);
    let mut log_scale = T::zero();
    let mut sum = T::one();
    let mut term = T::one();
    for k in 1..MAX_SERIES_TERMS {
        let kf = T::from_usize_lossy(k);
        term *= q / (kf * (kf + nu));
        sum += term;
        if sum > big {
            sum /= big;
            term /= big;
            log_scale += big.ln();
        }
        // Terms shrink once k(k+ν) > q.
        if term <= eps * sum && kf * (kf + nu) > q {
            break;
        }
    }
    log_scale + sum.ln()
}

fn log_hankel<T: Real>(nu: T, x: T) -> Option<T> {
    let mu = T::lit(4.0) * nu * nu;
    let eps = T::epsilon() / T::lit(4.0);
    let mut sum = T::one();
    let mut term = T::one();
    let mut prev = T::infinity();
    for k in 1..200 {
        let kf = T::from_usize_lossy(k);
        let odd = T::lit(2.0) * kf - T::one();
        term = -term * (mu - odd * odd) / (kf * T::lit(8.0) * x);
        if term == T::zero() {
            break;
        }
        if term.abs() >= prev {
            return None;
        }
        sum += term;
        prev = term.abs();
        if prev <= eps * sum.abs() {
            break;
        }
    }
    if !(sum > T::zero()) {
        return None;
    }
    Some(x - (T::lit(2.0) * T::PI() * x).ln() / T::lit(2.0) + sum.ln())
}
