//! Data-generating scenarios and the metrics used to score estimates.
//!
//! * [`acc`]: probability that a candidate utility is consistent with a fresh observation.
//! * [`gaussian_pred_accuracy`]: `E[μ*ᵀx̃* / μ*ᵀx*]`, where `x̃*` is the bundle the
//!   estimate predicts and `x*` the bundle the true mean utility buys. This is one
//!   minus the relative regret, so `1.0` is a perfect prediction.
//! * [`coupled_mismatch`]: probability that two parameters' utilities lead to
//!   different bundles on the same prices, an upper bound on the total variation
//!   distance between their observation laws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consistency::{ConsistencySet, Observation};
use crate::error::{Error, Result};
use crate::knapsack::solve_parts;
use crate::moment::{design_budgeted, design_full};
use crate::scalar::{dot, Real};
use crate::sphere;
use crate::stats::Estimate;
use crate::vmf::{VmfParams, VmfSampler};

/// Bundles closer than this in every coordinate are considered equal.
pub const BUNDLE_TOL: f64 = 1e-7;

/// Distribution of the price vector and budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbLaw {
    /// `a ~ Unif([1, 2]^n)`, `b ~ Unif([1, n])`.
    Uniform,
    /// `a ~ Unif({1, 2}^n)`, `b ~ Unif({1, …, n})`.
    Discrete,
    /// `a = (1, …, 1)`, `b ~ Unif({1, …, n})`.
    FixedA,
    /// `a = (1, …, 1)`, `b = n`: reveals the sign of every coordinate.
    DesignFull,
    /// Blocks of `⌈b_lower⌉` unit prices (others priced out) in rotation,
    /// `b ~ Unif([b_lower, max(b_lower, n)])`.
    DesignBudgeted { b_lower: f64 },
}

impl AbLaw {
    pub const TABLE: [AbLaw; 3] = [AbLaw::Uniform, AbLaw::Discrete, AbLaw::FixedA];

    /// Short label: `i`, `ii`, `iii`, `design_full`, `design_budgeted`.
    pub fn label(&self) -> &'static str {
        match self {
            AbLaw::Uniform => "i",
            AbLaw::Discrete => "ii",
            AbLaw::FixedA => "iii",
            AbLaw::DesignFull => "design_full",
            AbLaw::DesignBudgeted { .. } => "design_budgeted",
        }
    }

    /// Draws `(a, b)` for the `t`-th observation.
    pub fn draw<T: Real, R: Rng + ?Sized>(&self, n: usize, t: usize, rng: &mut R) -> (Vec<T>, T) {
        match *self {
            AbLaw::Uniform => {
                let a = (0..n).map(|_| T::lit(rng.random_range(1.0..2.0))).collect();
                let b = if n > 1 { rng.random_range(1.0..n as f64) } else { 1.0 };
                (a, T::lit(b))
            }
            AbLaw::Discrete => {
                let a = (0..n).map(|_| T::lit(rng.random_range(1..=2) as f64)).collect();
                (a, T::lit(rng.random_range(1..=n) as f64))
            }
            AbLaw::FixedA => (vec![T::one(); n], T::lit(rng.random_range(1..=n) as f64)),
            AbLaw::DesignFull => design_full(n),
            AbLaw::DesignBudgeted { b_lower } => {
                let blocks = design_budgeted(n, T::lit(b_lower)).expect("b_lower validated upstream");
                let a = blocks[t % blocks.len()].a.clone();
                let hi = b_lower.max(n as f64);
                let b = if hi > b_lower { rng.random_range(b_lower..hi) } else { b_lower };
                (a, T::lit(b))
            }
        }
    }
}

/// Distribution of the utility draws that replace `u*` under corruption.
#[derive(Debug, Clone, PartialEq)]
pub enum CorruptionLaw<T> {
    UniformSphere,
    Vmf(VmfParams<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityLaw<T> {
    Vmf(VmfParams<T>),
    /// `u*` with probability `1 − δ`, otherwise a draw from `corruption`.
    DeltaCorrupt {
        u_star: Vec<T>,
        delta: T,
        corruption: CorruptionLaw<T>,
    },
}

impl<T: Real> UtilityLaw<T> {
    pub fn validate(&self) -> Result<()> {
        if let UtilityLaw::DeltaCorrupt { u_star, delta, corruption } = self {
            sphere::check_unit(u_star)?;
            if !(*delta >= T::zero() && *delta <= T::one()) {
                return Err(Error::InvalidParameter(format!("delta must lie in [0, 1], got {delta}")));
            }
            if let CorruptionLaw::Vmf(p) = corruption {
                if p.n() != u_star.len() {
                    return Err(Error::DimensionMismatch { expected: u_star.len(), got: p.n() });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match self {
            UtilityLaw::Vmf(p) => p.n(),
            UtilityLaw::DeltaCorrupt { u_star, .. } => u_star.len(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        match self {
            UtilityLaw::Vmf(p) => VmfSampler::new(p.clone()).sample(rng),
            UtilityLaw::DeltaCorrupt { u_star, delta, corruption } => {
                if T::unit_uniform(rng) < *delta {
                    match corruption {
                        CorruptionLaw::UniformSphere => Ok(sphere::uniform(u_star.len(), rng)),
                        CorruptionLaw::Vmf(p) => VmfSampler::new(p.clone()).sample(rng),
                    }
                } else {
                    Ok(u_star.clone())
                }
            }
        }
    }
}

/// A complete description of how observations are generated.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub n: usize,
    pub ab_law: AbLaw,
    pub utility_law: UtilityLaw<T>,
    pub seed: u64,
}

impl<T: Real> Scenario<T> {
    pub fn new(ab_law: AbLaw, utility_law: UtilityLaw<T>, seed: u64) -> Result<Self> {
        utility_law.validate()?;
        if let AbLaw::DesignBudgeted { b_lower } = ab_law {
            if !(b_lower >= 1.0) {
                return Err(Error::InvalidParameter(format!("b_lower must be >= 1, got {b_lower}")));
            }
        }
        Ok(Self { n: utility_law.n(), ab_law, utility_law, seed })
    }

    /// Draws the `t`-th observation together with the utility that produced it.
    pub fn draw_observation<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<(Observation<T>, Vec<T>)> {
        let (a, b) = self.ab_law.draw(self.n, t, rng);
        let u = self.utility_law.draw(rng)?;
        let x = solve_parts(&u, &a, b).x.into_inner();
        Ok((Observation::new(x, a, b)?, u))
    }

    /// `T` observations with the realized utilities, from the scenario's own seed.
    pub fn generate(&self, count: usize) -> Result<(Vec<Observation<T>>, Vec<Vec<T>>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut obs = Vec::with_capacity(count);
        let mut us = Vec::with_capacity(count);
        for t in 0..count {
            let (o, u) = self.draw_observation(t, &mut rng)?;
            obs.push(o);
            us.push(u);
        }
        Ok((obs, us))
    }
}

fn check_draws(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one Monte Carlo draw".into()));
    }
    Ok(())
}

/// Monte Carlo estimate of `Acc(û) = P(û ∈ U)` for a fresh observation.
///
/// `u_hat` is normalized first, so any positive multiple gives the same result.
pub fn acc<T: Real, R: Rng + ?Sized>(u_hat: &[T], scenario: &Scenario<T>, draws: usize, rng: &mut R) -> Result<Estimate> {
    check_draws(draws)?;
    if u_hat.len() != scenario.n {
        return Err(Error::DimensionMismatch { expected: scenario.n, got: u_hat.len() });
    }
    let u_hat = sphere::normalize(u_hat).ok_or_else(|| Error::InvalidParameter("u_hat is zero".into()))?;
    let mut hits = 0;
    for t in 0..draws {
        let (obs, _) = scenario.draw_observation(t, rng)?;
        if ConsistencySet::build(&obs).contains_unchecked(&u_hat, T::zero()) {
            hits += 1;
        }
    }
    Ok(Estimate::proportion(hits, draws))
}

/// Mean of `μ*ᵀx̃* / μ*ᵀx*` over fresh `(a, b)`; draws where `μ*ᵀx* = 0` are resampled.
pub fn gaussian_pred_accuracy<T: Real, R: Rng + ?Sized>(
    mu_hat: &[T],
    mu_star: &[T],
    ab_law: AbLaw,
    draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_draws(draws)?;
    let n = mu_star.len();
    if mu_hat.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu_hat.len() });
    }
    let budget = 100 * draws;
    let mut ratios = Vec::with_capacity(draws);
    let mut attempts = 0;
    let mut t = 0;
    while ratios.len() < draws {
        attempts += 1;
        if attempts > budget {
            return Err(Error::DegenerateSamples(budget));
        }
        let (a, b): (Vec<T>, T) = ab_law.draw(n, t, rng);
        t += 1;
        let best = dot(mu_star, solve_parts(mu_star, &a, b).x.as_slice());
        if !(best > T::lit(1e-12)) {
            continue;
        }
        let predicted = dot(mu_star, solve_parts(mu_hat, &a, b).x.as_slice());
        ratios.push((predicted / best).to_f64_lossy());
    }
    Ok(Estimate::from_samples(&ratios))
}

/// How the two utilities in [`coupled_mismatch`] are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// Independent draws from the two laws.
    #[default]
    Independent,
    /// Both draws consume the same random stream (identical when the parameters agree).
    SharedStream,
}

/// Estimates `P(x*(u₁, a, b) ≠ x*(u₂, a, b))` with `u_k ~ vMF(θ_k)` and shared `(a, b)`.
pub fn coupled_mismatch<T: Real, R: Rng + ?Sized>(
    theta1: &VmfParams<T>,
    theta2: &VmfParams<T>,
    ab_law: AbLaw,
    draws: usize,
    coupling: Coupling,
    rng: &mut R,
) -> Result<Estimate> {
    check_draws(draws)?;
    let n = theta1.n();
    if theta2.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: theta2.n() });
    }
    let (s1, s2) = (VmfSampler::new(theta1.clone()), VmfSampler::new(theta2.clone()));
    let tol = T::tol(BUNDLE_TOL);
    let mut hits = 0;
    for t in 0..draws {
        let (a, b): (Vec<T>, T) = ab_law.draw(n, t, rng);
        let (u1, u2) = match coupling {
            Coupling::Independent => (s1.sample(rng)?, s2.sample(rng)?),
            Coupling::SharedStream => {
                let seed = rng.next_u64();
                (
                    s1.sample(&mut ChaCha8Rng::seed_from_u64(seed))?,
                    s2.sample(&mut ChaCha8Rng::seed_from_u64(seed))?,
                )
            }
        };
        let x1 = solve_parts(&u1, &a, b).x;
        let x2 = solve_parts(&u2, &a, b).x;
        if x1.as_slice().iter().zip(x2.as_slice()).any(|(&p, &q)| (p - q).abs() > tol) {
            hits += 1;
        }
    }
    Ok(Estimate::proportion(hits, draws))
}

/// Parameter at Euclidean distance `d ≤ 2` from `theta`: `μ` rotated by the
/// angle `2 asin(d/2)` toward the unit tangent `direction`, `κ` unchanged.
pub fn displaced<T: Real>(theta: &VmfParams<T>, direction: &[T], d: T) -> Result<VmfParams<T>> {
    let alpha = T::lit(2.0) * (d / T::lit(2.0)).asin();
    let (s, c) = alpha.sin_cos();
    let mu: Vec<T> = theta.mu().iter().zip(direction).map(|(&m, &w)| c * m + s * w).collect();
    let mu = sphere::normalize(&mu).ok_or_else(|| Error::InvalidParameter("degenerate direction".into()))?;
    VmfParams::new(mu, theta.kappa())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistancePoint {
    pub distance: f64,
    pub mismatch: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCurve {
    /// Same-parameter mismatch at `θ*` under independent draws.
    pub baseline: Estimate,
    pub points: Vec<DistancePoint>,
}

impl DistanceCurve {
    /// CSV with columns `distance, mismatch, stderr`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "distance,mismatch,stderr")?;
        writeln!(w, "0,{},{}", self.baseline.value, self.baseline.stderr)?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.distance, p.mismatch.value, p.mismatch.stderr)?;
        }
        Ok(())
    }
}

/// Mismatch between `θ*` and parameters displaced along one random tangent
/// direction at each distance. Every point reuses the stream seeded by `seed`,
/// so the curve is built from common random numbers.
pub fn distance_curve<T: Real>(
    theta_star: &VmfParams<T>,
    ab_law: AbLaw,
    distances: &[T],
    draws: usize,
    seed: u64,
) -> Result<DistanceCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = theta_star.n();
    // Tangent direction: Gaussian vector with its μ* component removed.
    let direction = loop {
        let g: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
        let proj = dot(&g, theta_star.mu());
        let t: Vec<T> = g.iter().zip(theta_star.mu()).map(|(&x, &m)| x - proj * m).collect();
        if let Some(t) = sphere::normalize(&t) {
            break t;
        }
    };
    let stream = rng.next_u64();
    let baseline = coupled_mismatch(
        theta_star,
        theta_star,
        ab_law,
        draws,
        Coupling::Independent,
        &mut ChaCha8Rng::seed_from_u64(stream),
    )?;
    let points = distances
        .iter()
        .map(|&d| {
            let theta = displaced(theta_star, &direction, d)?;
            let mismatch = coupled_mismatch(
                &theta,
                theta_star,
                ab_law,
                draws,
                Coupling::Independent,
                &mut ChaCha8Rng::seed_from_u64(stream),
            )?;
            Ok(DistancePoint { distance: d.to_f64_lossy(), mismatch })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceCurve { baseline, points })
}
