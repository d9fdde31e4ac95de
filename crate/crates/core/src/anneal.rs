//! Simulated annealing over the sphere for the margin-count objective
//! `Σ_t 1{u ∈ U_t(γ)}`.
//!
//! At step `k` the temperature is `η₀ c^{⌊k/τ⌋}`; a Gaussian random-walk
//! proposal with count change `Δ` is accepted with probability `min(e^{Δ/η}, 1)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consistency::{count_consistent, ConsistencySet};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sphere;

/// Margin `1 / (4 n² T^{1/4})`.
pub fn default_gamma<T: Real>(n: usize, t: usize) -> T {
    let n = T::from_usize_lossy(n);
    T::one() / (T::lit(4.0) * n * n * T::from_usize_lossy(t).powf(T::lit(0.25)))
}

/// Which iterate [`run_sa`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaOutput {
    /// Highest-count point visited.
    #[default]
    Incumbent,
    /// The last iterate `u^{(K)}`.
    Final,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig<T> {
    pub iterations: usize,
    pub eta0: T,
    pub reduction: T,
    pub interval: usize,
    pub gamma: T,
    pub sigma_u: T,
    pub output: SaOutput,
}

impl<T: Real> SaConfig<T> {
    /// `η₀ = 5`, `c = 0.9`, `τ = 25`, `K = 1000`, `σ_u = 0.3/√n`, `γ = default_gamma(n, T)`.
    ///
    /// Neighbouring cells of the count objective often differ by several
    /// units, so with `η₀ = 1` the walk is effectively greedy from the start
    /// and can stall in a poor local maximum.
    pub fn default_for(n: usize, t: usize) -> Self {
        Self {
            iterations: 1000,
            eta0: T::lit(5.0),
            reduction: T::lit(0.9),
            interval: 25,
            gamma: default_gamma(n, t.max(1)),
            sigma_u: T::lit(0.3) / T::from_usize_lossy(n).sqrt(),
            output: SaOutput::Incumbent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.interval >= 1
            && self.eta0 > T::zero()
            && self.reduction > T::zero()
            && self.reduction < T::one()
            && self.gamma >= T::zero()
            && self.sigma_u > T::zero();
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid annealing config {self:?}")));
        }
        Ok(())
    }

    /// Temperature in force at step `k`.
    pub fn temperature_at(&self, k: usize) -> T {
        let cuts = (k / self.interval) as i32;
        self.eta0 * self.reduction.powi(cuts)
    }
}

/// `min(exp(Δ/η), 1)`.
pub fn acceptance_probability<T: Real>(delta: i64, eta: T) -> T {
    if delta >= 0 {
        return T::one();
    }
    if eta <= T::zero() {
        return T::zero();
    }
    (T::lit(delta as f64) / eta).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaState<T> {
    pub u: Vec<T>,
    pub objective: usize,
    pub eta: T,
    pub step: usize,
    pub best_u: Vec<T>,
    pub best_objective: usize,
}

impl<T: Real> SaState<T> {
    pub fn start(u: Vec<T>, sets: &[ConsistencySet<T>], config: &SaConfig<T>) -> Self {
        let objective = count_consistent(sets, &u, config.gamma);
        Self {
            best_u: u.clone(),
            u,
            objective,
            eta: config.eta0,
            step: 0,
            best_objective: objective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaTraceEntry<T> {
    pub step: usize,
    pub objective: usize,
    pub best_objective: usize,
    pub eta: T,
    pub accepted: bool,
}

/// One annealing step; returns whether the proposal was accepted.
pub fn sa_step<T: Real, R: Rng + ?Sized>(
    state: &mut SaState<T>,
    sets: &[ConsistencySet<T>],
    config: &SaConfig<T>,
    rng: &mut R,
) -> bool {
    state.step += 1;
    state.eta = config.temperature_at(state.step);
    let candidate = sphere::gaussian_step(&state.u, config.sigma_u, rng);
    let count = count_consistent(sets, &candidate, config.gamma);
    let delta = count as i64 - state.objective as i64;
    let r = acceptance_probability(delta, state.eta);
    let accepted = r >= T::one() || T::unit_uniform(rng) < r;
    if accepted {
        state.u = candidate;
        state.objective = count;
        if count > state.best_objective {
            state.best_objective = count;
            state.best_u = state.u.clone();
        }
    }
    accepted
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaRun<T> {
    pub u_hat: Vec<T>,
    pub state: SaState<T>,
    pub trace: Vec<SaTraceEntry<T>>,
}

impl<T: Real> SaRun<T> {
    /// CSV with columns `step, objective, best_objective, eta, accepted`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,objective,best_objective,eta,accepted")?;
        for e in &self.trace {
            writeln!(w, "{},{},{},{},{}", e.step, e.objective, e.best_objective, e.eta, e.accepted as u8)?;
        }
        Ok(())
    }
}

/// Runs annealing from a uniform random start. Fully determined by `seed`.
pub fn run_sa<T: Real>(n: usize, sets: &[ConsistencySet<T>], config: &SaConfig<T>, seed: u64) -> Result<SaRun<T>> {
    config.validate()?;
    if let Some(s) = sets.iter().find(|s| s.n() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: s.n() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SaState::start(sphere::uniform(n, &mut rng), sets, config);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(SaTraceEntry {
        step: 0,
        objective: state.objective,
        best_objective: state.best_objective,
        eta: state.eta,
        accepted: true,
    });
    for _ in 0..config.iterations {
        let accepted = sa_step(&mut state, sets, config, &mut rng);
        trace.push(SaTraceEntry {
            step: state.step,
            objective: state.objective,
            best_objective: state.best_objective,
            eta: state.eta,
            accepted,
        });
    }
    let u_hat = match config.output {
        SaOutput::Incumbent => state.best_u.clone(),
        SaOutput::Final => state.u.clone(),
    };
    Ok(SaRun { u_hat, state, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::Observation;
    use crate::knapsack::{solve, Instance};
    use crate::scalar::norm;

    #[test]
    fn gamma_formula() {
        assert!((default_gamma::<f64>(5, 10_000) - 0.001).abs() < 1e-15);
        assert_eq!(default_gamma::<f64>(1, 1), 0.25);
        assert!((default_gamma::<f64>(3, 256) - 1.0 / 144.0).abs() < 1e-15);
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(2, 1.0f64), 1.0);
        assert!((acceptance_probability(-2, 1.0f64) - 0.1353352832366127).abs() < 1e-15);
        assert!(acceptance_probability(-1, 1e-300f64) < 1e-300);
        assert_eq!(acceptance_probability(-1, 0.0f64), 0.0);
    }

    fn dataset(n: usize, t: usize, seed: u64) -> (Vec<f64>, Vec<ConsistencySet<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u_star: Vec<f64> = sphere::uniform(n, &mut rng);
        let sets = (0..t)
            .map(|_| {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
                let b = rng.random_range(1.0..n as f64);
                let x = solve(&Instance::new(u_star.clone(), a.clone(), b).unwrap()).x;
                ConsistencySet::build(&Observation::new(x.into_inner(), a, b).unwrap())
            })
            .collect();
        (u_star, sets)
    }

    #[test]
    fn schedule_incumbent_and_bounds() {
        let (u_star, sets) = dataset(3, 60, 1);
        assert_eq!(count_consistent(&sets, &u_star, 0.0), 60);
        let cfg = SaConfig { iterations: 300, ..SaConfig::default_for(3, 60) };
        let run = run_sa(3, &sets, &cfg, 17).unwrap();
        assert!((norm(&run.u_hat) - 1.0).abs() < 1e-9);
        for w in run.trace.windows(2) {
            assert!(w[1].best_objective >= w[0].best_objective);
        }
        for e in &run.trace {
            assert!(e.objective <= 60 && e.best_objective >= e.objective);
            assert_eq!(e.eta, cfg.eta0 * cfg.reduction.powi((e.step / cfg.interval) as i32));
        }
        assert_eq!(count_consistent(&sets, &run.u_hat, cfg.gamma), run.state.best_objective);
        let fin = run_sa(3, &sets, &SaConfig { output: SaOutput::Final, ..cfg.clone() }, 17).unwrap();
        assert_eq!(fin.u_hat, fin.state.u);
        assert_eq!(run_sa(3, &sets, &cfg, 17).unwrap(), run);
    }

    #[test]
    fn zero_iterations_returns_start() {
        let (_, sets) = dataset(3, 10, 2);
        let cfg = SaConfig { iterations: 0, ..SaConfig::default_for(3, 10) };
        let run = run_sa(3, &sets, &cfg, 3).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert_eq!(run.state.objective, count_consistent(&sets, &run.u_hat, cfg.gamma));
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = SaConfig::<f64>::default_for(3, 10);
        cfg.reduction = 1.0;
        assert!(run_sa(3, &[], &cfg, 0).is_err());
    }

    #[test]
    fn trace_csv_header() {
        let cfg = SaConfig { iterations: 3, ..SaConfig::<f64>::default_for(2, 1) };
        let run = run_sa(2, &[], &cfg, 0).unwrap();
        let mut buf = Vec::new();
        run.write_trace_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("step,objective,best_objective,eta,accepted\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
