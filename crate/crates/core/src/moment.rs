//! Known-κ moment matching: recover `μ` from how often each coordinate is bought
//! under designed prices.
//!
//! With all prices equal to one and budget `n`, `x*_i = 1` exactly when
//! `u_i > 0`, so the purchase frequency of item `i` estimates
//! `P(u_i > 0 | μ_i)`. That probability depends on `μ` only through `μ_i`,
//! is strictly increasing in it, and is computed by quadrature over the angle
//! `ψ` between `u` and `e_i`:
//!
//! ```text
//! P(u_i > 0 | μ_i) = ∫_0^{π/2} (κ/2π)^{1/2} sin^{(n−1)/2}ψ I_{(n−3)/2}(κ sinφ sinψ)
//!                    / (sin^{(n−3)/2}φ I_{n/2−1}(κ)) · exp(κ cosφ cosψ) dψ,   cos φ = μ_i.
//! ```
//!
//! The implementation folds the `sin φ` powers into `I_ν(z)/z^ν`, which stays
//! finite at `sin φ = 0`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::knapsack::{is_excluded, PRICE_SENTINEL};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Real;
use crate::special::{log_bessel_i, log_bessel_i_over_power};
use crate::sphere;

const QUAD_TOL: f64 = 1e-8;
const QUAD_DEPTH: u32 = 30;
const BISECT_TOL: f64 = 1e-8;
/// Purchase level above which a coordinate counts as bought.
const BOUGHT_TOL: f64 = 1e-7;

/// `P(u_i > 0 | μ_i)` for `u ~ vMF(μ, κ)` on `S^{n−1}`.
pub fn marginal_positive_prob<T: Real>(mu_i: T, kappa: T, n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be >= 2, got {n}")));
    }
    if !(mu_i.abs() <= T::one()) {
        return Err(Error::InvalidParameter(format!("mu_i must lie in [-1, 1], got {mu_i}")));
    }
    if !(kappa > T::zero()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    let nu = (nf - T::lit(3.0)) / two;
    let cos_phi = mu_i;
    let sin_phi = (T::one() - mu_i * mu_i).max(T::zero()).sqrt();
    let log_const = (kappa / (two * T::PI())).ln() / two + nu * kappa.ln()
        - log_bessel_i(nf / two - T::one(), kappa)?;

    let integrand = |psi: T| -> T {
        let (s, c) = psi.sin_cos();
        let z = kappa * sin_phi * s;
        let g = log_bessel_i_over_power(nu, z).unwrap_or(T::nan());
        s.powi(n as i32 - 2) * (log_const + g + kappa * cos_phi * c).exp()
    };
    let p = adaptive_simpson(integrand, T::zero(), T::FRAC_PI_2(), T::tol(QUAD_TOL), QUAD_DEPTH)?;
    Ok(p.max(T::zero()).min(T::one()))
}

/// Solves `P(u_i > 0 | μ_i) = p_hat` for `μ_i` by bisection, clamping to ±1
/// when `p_hat` lies outside the attainable range.
pub fn invert_marginal<T: Real>(p_hat: T, kappa: T, n: usize) -> Result<T> {
    if !(p_hat >= T::zero() && p_hat <= T::one()) {
        return Err(Error::InvalidParameter(format!("p_hat must lie in [0, 1], got {p_hat}")));
    }
    if p_hat == T::lit(0.5) {
        return Ok(T::zero());
    }
    let (mut lo, mut hi) = (-T::one(), T::one());
    if p_hat <= marginal_positive_prob(lo, kappa, n)? {
        return Ok(lo);
    }
    if p_hat >= marginal_positive_prob(hi, kappa, n)? {
        return Ok(hi);
    }
    while hi - lo > T::tol(BISECT_TOL) {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if marginal_positive_prob(mid, kappa, n)? < p_hat {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// Tabulated forward map, useful for caching across many inversions.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable<T> {
    pub n: usize,
    pub kappa: T,
    pub grid: Vec<(T, T)>,
}

impl<T: Real> MarginalTable<T> {
    /// Evaluates the forward map on `points ≥ 2` equally spaced values of `μ_i` in `[−1, 1]`.
    pub fn build(n: usize, kappa: T, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidParameter("table needs at least two points".into()));
        }
        let step = T::lit(2.0) / T::from_usize_lossy(points - 1);
        let grid = (0..points)
            .map(|k| {
                let m = (-T::one() + step * T::from_usize_lossy(k)).min(T::one());
                marginal_positive_prob(m, kappa, n).map(|p| (m, p))
            })
            .collect::<Result<Vec<_>>>()?;
        let table = Self { n, kappa, grid };
        table.validate()?;
        Ok(table)
    }

    /// Checks probabilities lie in `(0, 1)` and strictly increase along the grid.
    pub fn validate(&self) -> Result<()> {
        for w in self.grid.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::InvalidParameter(format!(
                    "marginal table not strictly increasing at mu = {}",
                    w[1].0
                )));
            }
        }
        if self.grid.iter().any(|&(_, p)| !(p > T::zero() && p < T::one())) {
            return Err(Error::InvalidParameter("table probability outside (0, 1)".into()));
        }
        Ok(())
    }

    /// CSV with header `mu,p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n={} kappa={}", self.n, self.kappa)?;
        writeln!(w, "mu,p")?;
        for (m, p) in &self.grid {
            writeln!(w, "{m},{p}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("marginal table: {msg}"));
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end of input".into()))?
                .map_err(|e| bad(e.to_string()))
        };
        let meta = next()?;
        let mut n = None;
        let mut kappa = None;
        for field in meta.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("kappa", v)) => kappa = v.parse::<f64>().ok().map(T::lit),
                _ => {}
            }
        }
        let (n, kappa) = n.zip(kappa).ok_or_else(|| bad(format!("bad metadata line {meta:?}")))?;
        if next()?.trim() != "mu,p" {
            return Err(bad("missing mu,p header".into()));
        }
        let mut grid = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (m, p) = line.split_once(',').ok_or_else(|| bad(format!("bad row {line:?}")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map(T::lit).map_err(|e| bad(e.to_string()));
            grid.push((parse(m)?, parse(p)?));
        }
        let table = Self { n, kappa, grid };
        table.validate()?;
        Ok(table)
    }
}

/// Sign-revealing design: unit prices and budget `n`.
pub fn design_full<T: Real>(n: usize) -> (Vec<T>, T) {
    (vec![T::one(); n], T::from_usize_lossy(n))
}

/// One block of the budgeted design.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDesign<T> {
    pub a: Vec<T>,
    pub block: Vec<usize>,
}

/// Splits `0..n` into consecutive blocks of `⌈b_lower⌉` coordinates; each
/// block's prices are one on the block and [`PRICE_SENTINEL`] elsewhere, so
/// any budget `b ≥ b_lower` reveals the signs within the block.
pub fn design_budgeted<T: Real>(n: usize, b_lower: T) -> Result<Vec<BlockDesign<T>>> {
    if !(b_lower >= T::one()) {
        return Err(Error::InvalidParameter(format!("b_lower must be >= 1, got {b_lower}")));
    }
    let size = b_lower.ceil().to_usize().unwrap_or(usize::MAX).max(1);
    Ok((0..n)
        .step_by(size)
        .map(|start| {
            let block: Vec<usize> = (start..(start + size).min(n)).collect();
            let mut a = vec![T::lit(PRICE_SENTINEL); n];
            for &i in &block {
                a[i] = T::one();
            }
            BlockDesign { a, block }
        })
        .collect())
}

/// A purchase observed under a designed price vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignedObservation<T> {
    /// Coordinates whose sign this observation reveals.
    pub block: Vec<usize>,
    pub x_star: Vec<T>,
}

impl<T: Real> DesignedObservation<T> {
    /// Infers the revealed block from the prices: every coordinate not priced out.
    pub fn from_prices(a: &[T], x_star: Vec<T>) -> Self {
        let block = (0..a.len()).filter(|&i| !is_excluded(a[i])).collect();
        Self { block, x_star }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate<T> {
    pub mu: Vec<T>,
    pub p_hat: Vec<T>,
    /// Set when the raw estimate was the zero vector and `e_1` was substituted.
    pub degenerate: bool,
}

/// Estimates `μ` from designed observations with known `κ`.
pub fn estimate_mu<T: Real>(data: &[DesignedObservation<T>], kappa: T, n: usize) -> Result<MomentEstimate<T>> {
    let mut bought = vec![0usize; n];
    let mut seen = vec![0usize; n];
    for obs in data {
        if obs.x_star.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: obs.x_star.len() });
        }
        for &i in &obs.block {
            seen[i] += 1;
            if obs.x_star[i] > T::tol(BOUGHT_TOL) {
                bought[i] += 1;
            }
        }
    }
    if let Some(i) = seen.iter().position(|&s| s == 0) {
        return Err(Error::CoordinateUnobserved(i));
    }
    let p_hat: Vec<T> = bought
        .iter()
        .zip(&seen)
        .map(|(&b, &s)| T::from_usize_lossy(b) / T::from_usize_lossy(s))
        .collect();
    let raw = p_hat
        .iter()
        .map(|&p| invert_marginal(p, kappa, n))
        .collect::<Result<Vec<T>>>()?;
    let norm = raw.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
    match sphere::normalize(&raw).filter(|_| norm > T::tol(BISECT_TOL)) {
        Some(mu) => Ok(MomentEstimate { mu, p_hat, degenerate: false }),
        None => {
            log::warn!("moment-matching estimate is the zero vector; falling back to e_1");
            let mut mu = vec![T::zero(); n];
            mu[0] = T::one();
            Ok(MomentEstimate { mu, p_hat, degenerate: true })
        }
    }
}
