//! Consistency sets: the utilities under which an observed bundle is optimal.
//!
//! For an observation `(x*, a, b)` the set `U = {u ∈ S^{n-1} : x* solves LP(u, a, b)}`
//! is a polyhedral cone intersected with the sphere. It is stored as rows
//! `V u ≤ w` (with `w = 0`), each row touching at most two coordinates and
//! scaled to unit ∞-norm so that a margin `γ` means the same thing on every row.
//!
//! Coordinates are classified as bought (`x_i = 1`), fractional or unbought
//! (`x_i = 0`) up to [`TOL_ACTIVE`]. With ratios `r_i = u_i / a_i`:
//!
//! * bought and fractional items need `r_i ≥ 0`;
//! * under a slack budget, unbought items need `r_i ≤ 0`;
//! * under a binding budget, every unbought ratio is at most every bought or
//!   fractional ratio.
//!
//! Those three families alone are necessary but not sufficient once a
//! fractional coordinate is present, so [`RowMode::Completed`] (the default)
//! also pins fractional ratios equal to each other, below every bought ratio
//! and, under a slack budget, to zero. [`RowMode::Literal`] emits only the
//! three base families.

use crate::error::{Error, Result};
use crate::knapsack::{is_excluded, validate_prices, Bundle};
use crate::scalar::{dot, Real};
use crate::sphere::check_unit;

/// Tolerance used to classify coordinates and detect a binding budget.
pub const TOL_ACTIVE: f64 = 1e-7;

/// One revealed purchase.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    x_star: Bundle<T>,
    a: Vec<T>,
    b: T,
}

impl<T: Real> Observation<T> {
    pub fn new(x_star: Vec<T>, a: Vec<T>, b: T) -> Result<Self> {
        let x_star = Bundle::new(x_star)?;
        if x_star.is_empty() {
            return Err(Error::InvalidParameter("empty observation".into()));
        }
        validate_prices(&a, b, x_star.len())?;
        x_star.check_budget(&a, b)?;
        Ok(Self { x_star, a, b })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn bundle(&self) -> &[T] {
        self.x_star.as_slice()
    }

    pub fn prices(&self) -> &[T] {
        &self.a
    }

    pub fn budget(&self) -> T {
        self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowMode {
    #[default]
    Completed,
    Literal,
}

/// A sparse row `Σ coef_k · u_{idx_k} ≤ w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row<T> {
    terms: [(usize, T); 2],
    len: u8,
}

impl<T: Real> Row<T> {
    fn single(i: usize, c: T) -> Self {
        Self { terms: [(i, c), (i, T::zero())], len: 1 }
    }

    /// `r_i ≤ r_j` as `(e_i / a_i − e_j / a_j) · u ≤ 0`, scaled to unit ∞-norm.
    fn ratio_le(i: usize, ai: T, j: usize, aj: T) -> Self {
        let (ci, cj) = (ai.recip(), aj.recip());
        let s = ci.max(cj);
        Self { terms: [(i, ci / s), (j, -cj / s)], len: 2 }
    }

    pub fn terms(&self) -> &[(usize, T)] {
        &self.terms[..self.len as usize]
    }

    #[inline]
    pub fn eval(&self, u: &[T]) -> T {
        let (i, ci) = self.terms[0];
        if self.len == 1 {
            ci * u[i]
        } else {
            let (j, cj) = self.terms[1];
            ci * u[i] + cj * u[j]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencySet<T> {
    n: usize,
    rows: Vec<Row<T>>,
    w: Vec<T>,
    source: Observation<T>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Bought,
    Fractional,
    Unbought,
}

impl<T: Real> ConsistencySet<T> {
    /// Builds the completed row set with the default [`TOL_ACTIVE`].
    pub fn build(obs: &Observation<T>) -> Self {
        Self::build_with(obs, T::tol(TOL_ACTIVE), RowMode::Completed)
    }

    pub fn build_with(obs: &Observation<T>, tol_active: T, mode: RowMode) -> Self {
        let n = obs.n();
        let a = &obs.a;
        let x = obs.bundle();
        // Items priced out of the market carry no information.
        let class: Vec<Option<Class>> = (0..n)
            .map(|i| {
                if is_excluded(a[i]) {
                    None
                } else if x[i] >= T::one() - tol_active {
                    Some(Class::Bought)
                } else if x[i] <= tol_active {
                    Some(Class::Unbought)
                } else {
                    Some(Class::Fractional)
                }
            })
            .collect();
        let of = |c: Class| -> Vec<usize> { (0..n).filter(|&i| class[i] == Some(c)).collect() };
        let (bought, frac, unbought) = (of(Class::Bought), of(Class::Fractional), of(Class::Unbought));
        let binding = (dot(x, a) - obs.b).abs() <= tol_active;

        let mut rows = Vec::new();
        for &i in bought.iter().chain(&frac) {
            rows.push(Row::single(i, -T::one()));
        }
        if binding {
            for &i in &unbought {
                for &j in bought.iter().chain(&frac) {
                    rows.push(Row::ratio_le(i, a[i], j, a[j]));
                }
            }
        } else {
            for &i in &unbought {
                rows.push(Row::single(i, T::one()));
            }
        }
        if mode == RowMode::Completed {
            if binding {
                for (k, &i) in frac.iter().enumerate() {
                    for &j in &frac[k + 1..] {
                        rows.push(Row::ratio_le(i, a[i], j, a[j]));
                        rows.push(Row::ratio_le(j, a[j], i, a[i]));
                    }
                    for &j in &bought {
                        rows.push(Row::ratio_le(i, a[i], j, a[j]));
                    }
                }
            } else {
                for &i in &frac {
                    rows.push(Row::single(i, T::one()));
                }
            }
        }
        let w = vec![T::zero(); rows.len()];
        Self { n, rows, w, source: obs.clone() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Row<T>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[T] {
        &self.w
    }

    pub fn source(&self) -> &Observation<T> {
        &self.source
    }

    /// Dense `m × n` coefficient matrix `V`.
    pub fn matrix(&self) -> Vec<Vec<T>> {
        self.rows
            .iter()
            .map(|r| {
                let mut dense = vec![T::zero(); self.n];
                for &(i, c) in r.terms() {
                    dense[i] += c;
                }
                dense
            })
            .collect()
    }

    /// Membership in the margin set `{u : V u ≤ w − γ}`; checks that `u` is unit.
    pub fn contains(&self, u: &[T], gamma: T) -> Result<bool> {
        if u.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: u.len() });
        }
        check_unit(u)?;
        if !(gamma >= T::zero()) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(self.contains_unchecked(u, gamma))
    }

    /// [`contains`](Self::contains) without validating `u` or `gamma`.
    #[inline]
    pub fn contains_unchecked(&self, u: &[T], gamma: T) -> bool {
        self.rows.iter().zip(&self.w).all(|(r, &w)| r.eval(u) <= w - gamma)
    }
}

/// Number of sets whose `γ`-margin version contains `u`.
pub fn count_consistent<T: Real>(sets: &[ConsistencySet<T>], u: &[T], gamma: T) -> usize {
    sets.iter().filter(|s| s.contains_unchecked(u, gamma)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knapsack::{is_optimal, solve, Instance};
    use crate::sphere;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(x: &[f64], a: &[f64], b: f64) -> ConsistencySet<f64> {
        ConsistencySet::build(&Observation::new(x.to_vec(), a.to_vec(), b).unwrap())
    }

    fn oracle(s: &ConsistencySet<f64>, u: &[f64]) -> bool {
        let o = s.source();
        let inst = Instance::new(u.to_vec(), o.prices().to_vec(), o.budget()).unwrap();
        is_optimal(&Bundle::new(o.bundle().to_vec()).unwrap(), &inst, 1e-9).unwrap()
    }

    #[test]
    fn binding_two_items() {
        let s = set(&[1.0, 0.0], &[1.0, 1.0], 1.0);
        assert_eq!(s.matrix(), vec![vec![-1.0, 0.0], vec![-1.0, 1.0]]);
        assert!(s.contains(&[0.8, 0.6], 0.0).unwrap());
        assert!(!s.contains(&[0.6, 0.8], 0.0).unwrap());
        assert!(!s.contains(&[0.8, 0.6], 0.5).unwrap());
    }

    #[test]
    fn slack_budget_rows() {
        let s = set(&[1.0, 1.0], &[1.0, 1.0], 3.0);
        assert_eq!(s.matrix(), vec![vec![-1.0, 0.0], vec![0.0, -1.0]]);
    }

    #[test]
    fn fractional_rows_include_completion() {
        let s = set(&[1.0, 0.5, 0.0], &[0.5, 1.0, 1.0], 1.0);
        let m = s.matrix();
        assert_eq!(m.len(), 5);
        // -u1/0.5 <= 0 and -u2 <= 0
        assert!(m.contains(&vec![-1.0, 0.0, 0.0]));
        assert!(m.contains(&vec![0.0, -1.0, 0.0]));
        // u3 - u2 <= 0, u3 - u1/0.5 <= 0, u2 - u1/0.5 <= 0 (last two scaled by 1/2)
        assert!(m.contains(&vec![0.0, -1.0, 1.0]));
        assert!(m.contains(&vec![-1.0, 0.0, 0.5]));
        assert!(m.contains(&vec![-1.0, 0.5, 0.0]));
        let lit = ConsistencySet::build_with(
            s.source(),
            TOL_ACTIVE,
            RowMode::Literal,
        );
        assert_eq!(lit.rows().len(), 4);
    }

    #[test]
    fn literal_rows_admit_suboptimal_utility() {
        let obs = Observation::new(vec![1.0, 0.5], vec![1.0, 1.0], 1.5).unwrap();
        let u = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        let lit = ConsistencySet::build_with(&obs, TOL_ACTIVE, RowMode::Literal);
        let full = ConsistencySet::build(&obs);
        assert!(lit.contains(&u, 0.0).unwrap());
        assert!(!full.contains(&u, 0.0).unwrap());
        assert!(!oracle(&full, &u));
    }

    #[test]
    fn dense_circle_grid_agrees_with_oracle() {
        let cases = [
            (vec![1.0, 0.0], vec![1.0, 1.0], 1.0),
            (vec![1.0, 0.5], vec![1.0, 1.0], 1.5),
            (vec![0.0, 0.0], vec![1.0, 2.0], 3.0),
            (vec![1.0, 1.0], vec![1.0, 1.0], 3.0),
        ];
        for (x, a, b) in cases {
            let s = set(&x, &a, b);
            for k in 0..3600 {
                let t = (k as f64 + 0.37) * std::f64::consts::TAU / 3600.0;
                let u = [t.cos(), t.sin()];
                assert_eq!(s.contains(&u, 0.0).unwrap(), oracle(&s, &u), "x={x:?} t={t}");
            }
        }
    }

    #[test]
    fn random_observations_agree_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let n = rng.random_range(2..=5);
            let u_t: Vec<f64> = sphere::uniform(n, &mut rng);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
            let b = rng.random_range(1.0..n as f64);
            let x = solve(&Instance::new(u_t.clone(), a.clone(), b).unwrap()).x;
            let s = ConsistencySet::build(&Observation::new(x.into_inner(), a, b).unwrap());
            assert!(s.contains(&u_t, 0.0).unwrap());
            let v: Vec<f64> = sphere::uniform(n, &mut rng);
            assert_eq!(s.contains(&v, 0.0).unwrap(), oracle(&s, &v));
            let g = rng.random_range(0.0..0.2);
            if s.contains(&v, g).unwrap() {
                assert!(s.contains(&v, 0.0).unwrap());
            }
        }
    }

    #[test]
    fn counting() {
        let sets = vec![
            set(&[1.0, 0.0], &[1.0, 1.0], 1.0),
            set(&[0.0, 1.0], &[1.0, 1.0], 1.0),
            set(&[1.0, 1.0], &[1.0, 1.0], 3.0),
        ];
        assert_eq!(count_consistent::<f64>(&[], &[1.0, 0.0], 0.0), 0);
        assert_eq!(count_consistent(&sets, &[0.8, 0.6], 0.0), 2);
    }

    #[test]
    fn contains_validates() {
        let s = set(&[1.0, 0.0], &[1.0, 1.0], 1.0);
        assert!(matches!(s.contains(&[1.0, 0.0, 0.0], 0.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(s.contains(&[1.0, 1.0], 0.0), Err(Error::NotUnit(_))));
    }
}
