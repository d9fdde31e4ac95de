//! Metropolis–Hastings sampling of the posterior over vMF parameters `θ = (μ, κ)`.
//!
//! The likelihood of an observation is the vMF mass of its consistency set,
//! estimated by Monte Carlo from one batch of `M` draws per parameter value
//! that is shared across all observations. Counts are floored at one half so
//! that an empty region costs `ln(1/(2M))` instead of `−∞`.
//!
//! Each step re-estimates the likelihood at both the current and the proposed
//! parameter with common random numbers: draw `m` of both batches comes from
//! the same ChaCha stream. This is a noisy-MH approximation of exact MH.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consistency::ConsistencySet;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sphere;
use crate::vmf::{VmfParams, VmfSampler};

/// Uniform prior on `S^{n-1} × (κ_lo, κ_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorBox<T> {
    kappa_lo: T,
    kappa_hi: T,
}

impl<T: Real> PriorBox<T> {
    pub fn new(kappa_lo: T, kappa_hi: T) -> Result<Self> {
        if !(kappa_lo > T::zero() && kappa_hi > kappa_lo) || !kappa_hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prior box needs 0 < kappa_lo < kappa_hi, got ({kappa_lo}, {kappa_hi})"
            )));
        }
        Ok(Self { kappa_lo, kappa_hi })
    }

    pub fn kappa_lo(&self) -> T {
        self.kappa_lo
    }

    pub fn kappa_hi(&self) -> T {
        self.kappa_hi
    }

    pub fn width(&self) -> T {
        self.kappa_hi - self.kappa_lo
    }

    pub fn contains(&self, kappa: T) -> bool {
        kappa > self.kappa_lo && kappa < self.kappa_hi
    }

    /// Folds `kappa` back into the box by reflecting at both edges.
    pub fn reflect(&self, kappa: T) -> T {
        let w = self.width();
        let period = w + w;
        let mut k = (kappa - self.kappa_lo) % period;
        if k < T::zero() {
            k += period;
        }
        if k > w {
            k = period - k;
        }
        let out = self.kappa_lo + k;
        // Keep the open interval open.
        if out <= self.kappa_lo || out >= self.kappa_hi {
            self.kappa_lo + w / T::lit(2.0)
        } else {
            out
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> VmfParams<T> {
        let mu = sphere::uniform(n, rng);
        let kappa = self.reflect(self.kappa_lo + self.width() * T::unit_uniform(rng));
        VmfParams::new(mu, kappa).expect("prior draws are valid")
    }
}

/// Random-walk proposal scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalScales<T> {
    pub sigma_mu: T,
    pub sigma_kappa: T,
}

impl<T: Real> ProposalScales<T> {
    /// `σ_μ = 0.3/√n`, `σ_κ = 0.025 (κ_hi − κ_lo)`.
    pub fn default_for(n: usize, prior: &PriorBox<T>) -> Self {
        Self {
            sigma_mu: T::lit(0.3) / T::from_usize_lossy(n).sqrt(),
            sigma_kappa: T::lit(0.025) * prior.width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig<T> {
    pub prior: PriorBox<T>,
    pub scales: ProposalScales<T>,
    /// Monte Carlo draws per likelihood evaluation (`M`).
    pub samples_per_theta: usize,
}

impl<T: Real> ChainConfig<T> {
    pub fn default_for(n: usize) -> Self {
        let prior = PriorBox::new(T::lit(0.5), T::lit(20.0)).expect("valid default box");
        Self { scales: ProposalScales::default_for(n, &prior), prior, samples_per_theta: 1024 }
    }
}

/// `M` vectors of dimension `n` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SampleBatch<T> {
    pub fn draw<R: Rng + ?Sized>(theta: &VmfParams<T>, m: usize, rng: &mut R) -> Result<Self> {
        let n = theta.n();
        let sampler = VmfSampler::new(theta.clone());
        let mut data = vec![T::zero(); n * m];
        for chunk in data.chunks_exact_mut(n) {
            sampler.sample_into(rng, chunk)?;
        }
        Ok(Self { n, data })
    }

    /// Draw `m` is taken from ChaCha stream `m` under `seed`, so two batches
    /// drawn with the same seed at nearby parameters are tightly coupled.
    pub fn draw_coupled(theta: &VmfParams<T>, m: usize, seed: u64) -> Result<Self> {
        let n = theta.n();
        let sampler = VmfSampler::new(theta.clone());
        let mut data = vec![T::zero(); n * m];
        for (k, chunk) in data.chunks_exact_mut(n).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            sampler.sample_into(&mut rng, chunk)?;
        }
        Ok(Self { n, data })
    }

    pub fn from_vectors(n: usize, vectors: &[Vec<T>]) -> Self {
        Self { n, data: vectors.iter().flatten().copied().collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.n)
    }
}

/// `ln(max(c, 1/2) / M)` where `c` counts batch members inside `set`.
pub fn region_log_prob_from_batch<T: Real>(set: &ConsistencySet<T>, batch: &SampleBatch<T>) -> T {
    let hits = batch.iter().filter(|u| set.contains_unchecked(u, T::zero())).count();
    floored_log_fraction(hits, batch.len())
}

fn floored_log_fraction<T: Real>(hits: usize, m: usize) -> T {
    let c = if hits == 0 { T::lit(0.5) } else { T::from_usize_lossy(hits) };
    (c / T::from_usize_lossy(m)).ln()
}

/// Monte Carlo estimate of `ln P(u ∈ set)` for `u ~ vMF(theta)` from `m` fresh draws.
pub fn mc_region_log_prob<T: Real, R: Rng + ?Sized>(
    theta: &VmfParams<T>,
    set: &ConsistencySet<T>,
    m: usize,
    rng: &mut R,
) -> Result<T> {
    check_m(m)?;
    Ok(region_log_prob_from_batch(set, &SampleBatch::draw(theta, m, rng)?))
}

/// Sum of per-observation region log-probabilities over one shared batch.
pub fn log_likelihood_from_batch<T: Real>(sets: &[ConsistencySet<T>], batch: &SampleBatch<T>) -> T {
    let mut hits = vec![0usize; sets.len()];
    for u in batch.iter() {
        for (h, s) in hits.iter_mut().zip(sets) {
            if s.contains_unchecked(u, T::zero()) {
                *h += 1;
            }
        }
    }
    hits.iter().fold(T::zero(), |acc, &h| acc + floored_log_fraction::<T>(h, batch.len()))
}

pub fn log_likelihood<T: Real, R: Rng + ?Sized>(
    theta: &VmfParams<T>,
    sets: &[ConsistencySet<T>],
    m: usize,
    rng: &mut R,
) -> Result<T> {
    check_m(m)?;
    if sets.is_empty() {
        return Ok(T::zero());
    }
    Ok(log_likelihood_from_batch(sets, &SampleBatch::draw(theta, m, rng)?))
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("Monte Carlo sample size must be >= 1".into()));
    }
    Ok(())
}

/// Deterministic core of the proposal: `μ' = (μ + ε_μ)/‖μ + ε_μ‖`, `κ' = reflect(κ + ε_κ)`.
/// Returns `None` when `μ + ε_μ` vanishes.
pub fn apply_perturbation<T: Real>(
    theta: &VmfParams<T>,
    eps_mu: &[T],
    eps_kappa: T,
    prior: &PriorBox<T>,
) -> Option<VmfParams<T>> {
    let mu = sphere::perturb(theta.mu(), eps_mu)?;
    VmfParams::new(mu, prior.reflect(theta.kappa() + eps_kappa)).ok()
}

pub fn propose<T: Real, R: Rng + ?Sized>(
    theta: &VmfParams<T>,
    scales: &ProposalScales<T>,
    prior: &PriorBox<T>,
    rng: &mut R,
) -> VmfParams<T> {
    loop {
        let eps: Vec<T> = (0..theta.n()).map(|_| scales.sigma_mu * T::standard_normal(rng)).collect();
        let ek = scales.sigma_kappa * T::standard_normal(rng);
        if let Some(p) = apply_perturbation(theta, &eps, ek, prior) {
            return p;
        }
    }
}

/// `min(exp(Δ), 1)`.
pub fn acceptance_probability<T: Real>(log_ratio: T) -> T {
    if log_ratio >= T::zero() {
        T::one()
    } else {
        log_ratio.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<T> {
    pub theta: VmfParams<T>,
    pub log_lik_hat: T,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T> {
    pub theta: VmfParams<T>,
    pub log_lik_hat: T,
    pub step_index: usize,
    pub trace: Vec<TraceEntry<T>>,
}

impl<T: Real> ChainState<T> {
    pub fn start(theta: VmfParams<T>, log_lik_hat: T) -> Self {
        let trace = vec![TraceEntry { theta: theta.clone(), log_lik_hat, accepted: true }];
        Self { theta, log_lik_hat, step_index: 0, trace }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.step_index == 0 {
            return 0.0;
        }
        let acc = self.trace[1..].iter().filter(|e| e.accepted).count();
        acc as f64 / self.step_index as f64
    }

    /// Normalized average of `μ` over the trace after discarding `burn_in` entries.
    pub fn mean_direction(&self, burn_in: usize) -> Vec<T> {
        let n = self.theta.n();
        let tail = &self.trace[burn_in.min(self.trace.len() - 1)..];
        let mut acc = vec![T::zero(); n];
        for e in tail {
            for (a, &m) in acc.iter_mut().zip(e.theta.mu()) {
                *a += m;
            }
        }
        sphere::normalize(&acc).unwrap_or_else(|| self.theta.mu().to_vec())
    }

    pub fn mean_kappa(&self, burn_in: usize) -> T {
        let tail = &self.trace[burn_in.min(self.trace.len() - 1)..];
        tail.iter().fold(T::zero(), |s, e| s + e.theta.kappa()) / T::from_usize_lossy(tail.len())
    }

    /// CSV with columns `step, mu_1..mu_n, kappa, log_lik_hat, accepted`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.theta.n();
        let mu_cols: Vec<String> = (1..=n).map(|i| format!("mu_{i}")).collect();
        writeln!(w, "step,{},kappa,log_lik_hat,accepted", mu_cols.join(","))?;
        for (k, e) in self.trace.iter().enumerate() {
            let mu: Vec<String> = e.theta.mu().iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{k},{},{},{},{}",
                mu.join(","),
                e.theta.kappa(),
                e.log_lik_hat,
                e.accepted as u8
            )?;
        }
        Ok(())
    }
}

/// One Metropolis–Hastings transition.
pub fn mh_step<T: Real, R: Rng + ?Sized>(
    state: &mut ChainState<T>,
    sets: &[ConsistencySet<T>],
    config: &ChainConfig<T>,
    rng: &mut R,
) -> Result<()> {
    check_m(config.samples_per_theta)?;
    let proposal = propose(&state.theta, &config.scales, &config.prior, rng);
    let crn_seed = rng.next_u64();
    let (ll_new, ll_old) = if sets.is_empty() {
        (T::zero(), T::zero())
    } else {
        let m = config.samples_per_theta;
        (
            log_likelihood_from_batch(sets, &SampleBatch::draw_coupled(&proposal, m, crn_seed)?),
            log_likelihood_from_batch(sets, &SampleBatch::draw_coupled(&state.theta, m, crn_seed)?),
        )
    };
    let r = acceptance_probability(ll_new - ll_old);
    let accepted = T::unit_uniform(rng) < r;
    if accepted {
        state.theta = proposal;
        state.log_lik_hat = ll_new;
    } else {
        state.log_lik_hat = ll_old;
    }
    state.step_index += 1;
    state.trace.push(TraceEntry {
        theta: state.theta.clone(),
        log_lik_hat: state.log_lik_hat,
        accepted,
    });
    Ok(())
}

/// Runs `k` steps from a prior draw. Fully determined by `seed`.
pub fn run_chain<T: Real>(
    sets: &[ConsistencySet<T>],
    k: usize,
    config: &ChainConfig<T>,
    seed: u64,
) -> Result<ChainState<T>> {
    let n = match sets.first() {
        Some(s) => s.n(),
        None => return Err(Error::InvalidParameter("run_chain needs the dimension; use run_chain_n".into())),
    };
    run_chain_n(n, sets, k, config, seed)
}

/// [`run_chain`] with an explicit dimension, allowing an empty dataset.
pub fn run_chain_n<T: Real>(
    n: usize,
    sets: &[ConsistencySet<T>],
    k: usize,
    config: &ChainConfig<T>,
    seed: u64,
) -> Result<ChainState<T>> {
    if let Some(s) = sets.iter().find(|s| s.n() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: s.n() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta0 = config.prior.sample(n, &mut rng);
    let ll0 = if sets.is_empty() {
        T::zero()
    } else {
        log_likelihood(&theta0, sets, config.samples_per_theta, &mut rng)?
    };
    let mut state = ChainState::start(theta0, ll0);
    for _ in 0..k {
        mh_step(&mut state, sets, config, &mut rng)?;
    }
    Ok(state)
}
