//! Forward model: the single-budget fractional knapsack `max u·x s.t. a·x ≤ b, 0 ≤ x ≤ 1`.
//!
//! The optimum is greedy in the ratio `u_i / a_i`. Coordinates with `u_i ≤ 0`
//! are never bought, and neither are items priced at or above
//! [`PRICE_SENTINEL`], which stands in for an infinite price.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Absolute feasibility / value tolerance.
pub const TOL: f64 = 1e-9;

/// Prices at or above this value are treated as "not for sale".
pub const PRICE_SENTINEL: f64 = 1e9;

#[inline]
pub(crate) fn is_excluded<T: Real>(price: T) -> bool {
    price >= T::lit(PRICE_SENTINEL)
}

pub(crate) fn validate_prices<T: Real>(a: &[T], b: T, n: usize) -> Result<()> {
    if a.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.len() });
    }
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, &p)| !(p > T::zero())) {
        return Err(Error::NonPositivePrice { index, value: value.to_f64_lossy() });
    }
    if !(b >= T::zero()) {
        return Err(Error::NegativeBudget(b.to_f64_lossy()));
    }
    Ok(())
}

/// A utility vector together with the prices and budget it faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    u: Vec<T>,
    a: Vec<T>,
    b: T,
}

impl<T: Real> Instance<T> {
    pub fn new(u: Vec<T>, a: Vec<T>, b: T) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::InvalidParameter("empty instance".into()));
        }
        validate_prices(&a, b, u.len())?;
        Ok(Self { u, a, b })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn utility(&self) -> &[T] {
        &self.u
    }

    pub fn prices(&self) -> &[T] {
        &self.a
    }

    pub fn budget(&self) -> T {
        self.b
    }
}

/// A purchase vector with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle<T>(Vec<T>);

impl<T: Real> Bundle<T> {
    /// Checks the box constraint `0 ≤ x_i ≤ 1` up to [`TOL`].
    pub fn new(x: Vec<T>) -> Result<Self> {
        let tol = T::tol(TOL);
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= -tol && v <= T::one() + tol))
        {
            return Err(Error::InfeasibleBundle(format!("x[{i}] = {v} outside [0, 1]")));
        }
        Ok(Self(x))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks `a·x ≤ b + TOL`.
    pub fn check_budget(&self, a: &[T], b: T) -> Result<()> {
        let spend = dot(&self.0, a);
        if spend > b + T::tol(TOL).max(T::epsilon() * T::lit(64.0) * b) {
            return Err(Error::InfeasibleBundle(format!("spend {spend} exceeds budget {b}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome<T> {
    pub x: Bundle<T>,
    pub value: T,
    /// Ratio `u_i / a_i` at which the budget binds; zero when the budget is slack.
    pub threshold: T,
    pub fractional_index: Option<usize>,
}

/// Solves `LP(u, a, b)` in closed form.
pub fn solve<T: Real>(inst: &Instance<T>) -> SolveOutcome<T> {
    solve_parts(&inst.u, &inst.a, inst.b)
}

/// Same as [`solve`] on raw slices; inputs are assumed valid.
pub(crate) fn solve_parts<T: Real>(u: &[T], a: &[T], b: T) -> SolveOutcome<T> {
    let n = u.len();
    let mut x = vec![T::zero(); n];
    let mut order: Vec<usize> = (0..n)
        .filter(|&i| u[i] > T::zero() && !is_excluded(a[i]))
        .collect();

    let total: T = order.iter().fold(T::zero(), |s, &i| s + a[i]);
    if b >= total {
        for &i in &order {
            x[i] = T::one();
        }
        let value = order.iter().fold(T::zero(), |s, &i| s + u[i]);
        return SolveOutcome { x: Bundle(x), value, threshold: T::zero(), fractional_index: None };
    }

    order.sort_by(|&i, &j| {
        let (ri, rj) = (u[i] / a[i], u[j] / a[j]);
        rj.partial_cmp(&ri).unwrap_or(Ordering::Equal).then(i.cmp(&j))
    });

    let mut remaining = b;
    let mut threshold = T::zero();
    let mut fractional_index = None;
    for &i in &order {
        if a[i] <= remaining {
            x[i] = T::one();
            remaining -= a[i];
        } else {
            threshold = u[i] / a[i];
            if remaining > T::zero() {
                x[i] = remaining / a[i];
                fractional_index = Some(i);
            }
            break;
        }
    }
    let value = dot(u, &x);
    SolveOutcome { x: Bundle(x), value, threshold, fractional_index }
}

/// Definition-level optimality check: `u·x ≥ OPT − tol`.
///
/// An infeasible `x` is reported as an error rather than `false`.
pub fn is_optimal<T: Real>(x: &Bundle<T>, inst: &Instance<T>, tol: T) -> Result<bool> {
    if x.len() != inst.n() {
        return Err(Error::DimensionMismatch { expected: inst.n(), got: x.len() });
    }
    x.check_budget(&inst.a, inst.b)?;
    for (i, (&xi, &ai)) in x.as_slice().iter().zip(&inst.a).enumerate() {
        if is_excluded(ai) && xi > T::tol(TOL) {
            return Err(Error::InfeasibleBundle(format!("x[{i}] buys an excluded item")));
        }
    }
    let best = solve(inst).value;
    Ok(dot(&inst.u, x.as_slice()) >= best - tol)
}
