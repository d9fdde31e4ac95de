//! The von Mises–Fisher distribution on `S^{n-1}`:
//! density `C_n(κ) exp(κ μᵀu)` with
//! `C_n(κ) = κ^{n/2−1} / ((2π)^{n/2} I_{n/2−1}(κ))`.
//!
//! Sampling follows Wood's rejection scheme for the cosine `t = μᵀu`, a
//! uniform tangent direction, and a Householder reflection taking `e_1` to `μ`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};
use crate::special::log_bessel_i;
use crate::sphere::{self, check_unit};

/// Proposals allowed per draw before the sampler gives up.
pub const MAX_PROPOSALS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams<T> {
    mu: Vec<T>,
    kappa: T,
}

impl<T: Real> VmfParams<T> {
    pub fn new(mu: Vec<T>, kappa: T) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "vMF needs dimension >= 2, got {}",
                mu.len()
            )));
        }
        check_unit(&mu)?;
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self { mu, kappa })
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// `(μ, κ)` flattened into `R^{n+1}`, the space in which parameter distances are taken.
    pub fn as_vector(&self) -> Vec<T> {
        let mut v = self.mu.clone();
        v.push(self.kappa);
        v
    }

    pub fn sampler(&self) -> VmfSampler<T> {
        VmfSampler::new(self.clone())
    }
}

/// `ln C_n(κ)`.
pub fn log_norm_const<T: Real>(n: usize, kappa: T) -> Result<T> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("vMF needs dimension >= 2, got {n}")));
    }
    if !(kappa > T::zero()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    let order = T::from_usize_lossy(n) / T::lit(2.0) - T::one();
    Ok(order * kappa.ln()
        - T::from_usize_lossy(n) / T::lit(2.0) * (T::lit(2.0) * T::PI()).ln()
        - log_bessel_i(order, kappa)?)
}

pub fn log_density<T: Real>(u: &[T], params: &VmfParams<T>) -> Result<T> {
    if u.len() != params.n() {
        return Err(Error::DimensionMismatch { expected: params.n(), got: u.len() });
    }
    check_unit(u)?;
    Ok(log_norm_const(params.n(), params.kappa)? + params.kappa * dot(&params.mu, u))
}

/// Draws a single vector from `vMF(params)`.
pub fn sample<T: Real, R: Rng + ?Sized>(params: &VmfParams<T>, rng: &mut R) -> Result<Vec<T>> {
    params.sampler().sample(rng)
}

/// Rejection sampler with the envelope constants precomputed for one parameter.
#[derive(Debug, Clone)]
pub struct VmfSampler<T: Real> {
    params: VmfParams<T>,
    b: T,
    x0: T,
    c: T,
    beta: T::BetaDist,
    reflector: Option<(Vec<T>, T)>,
}

impl<T: Real> VmfSampler<T> {
    pub fn new(params: VmfParams<T>) -> Self {
        let dm1 = T::from_usize_lossy(params.n() - 1);
        let kappa = params.kappa;
        let two = T::lit(2.0);
        // (−2κ + √(4κ² + (n−1)²)) / (n−1), rearranged to avoid cancellation
        let b = dm1 / (two * kappa + (T::lit(4.0) * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (T::one() - b) / (T::one() + b);
        let c = kappa * x0 + dm1 * (T::one() - x0 * x0).ln();
        let half = dm1 / two;
        let beta = T::beta_distribution(half, half).expect("shape parameters are positive");

        // Householder vector v = e_1 − μ, H = I − 2 v vᵀ / vᵀv maps e_1 to μ.
        let mut v: Vec<T> = params.mu.iter().map(|&m| -m).collect();
        v[0] += T::one();
        let vv = dot(&v, &v);
        let reflector = (vv > T::lit(1e-30)).then_some((v, vv));
        Self { params, b, x0, c, beta, reflector }
    }

    pub fn params(&self) -> &VmfParams<T> {
        &self.params
    }

    /// Cosine `t = μᵀu` of a draw.
    pub fn sample_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<T> {
        let dm1 = T::from_usize_lossy(self.params.n() - 1);
        let one = T::one();
        for _ in 0..MAX_PROPOSALS {
            let z = T::sample_beta(&self.beta, rng);
            let w = (one - (one + self.b) * z) / (one - (one - self.b) * z);
            let accept = self.params.kappa * w + dm1 * (one - self.x0 * w).ln() - self.c;
            let u = T::unit_uniform(rng);
            if accept >= u.ln() {
                return Ok(w);
            }
        }
        Err(Error::SamplerExhausted(MAX_PROPOSALS))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.params.n()];
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }

    /// Writes one draw into `out` (length `n`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) -> Result<()> {
        let n = self.params.n();
        let w = self.sample_cosine(rng)?;
        let tangent: Vec<T> = sphere::uniform(n - 1, rng);
        let s = (T::one() - w * w).max(T::zero()).sqrt();
        out[0] = w;
        for (o, &t) in out[1..].iter_mut().zip(&tangent) {
            *o = s * t;
        }
        if let Some((v, vv)) = &self.reflector {
            let k = T::lit(2.0) * dot(v, out) / *vv;
            for (o, &vi) in out.iter_mut().zip(v) {
                *o -= k * vi;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::mean_resultant_length;
    use crate::stats::{ks_p_value, ks_statistic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn normalizer_matches_n3_closed_form() {
        for k in [0.1f64, 1.0, 10.0, 50.0] {
            let closed = (k / (4.0 * PI * k.sinh())).ln();
            let got = log_norm_const(3, k).unwrap();
            assert!(((got - closed) / closed).abs() < 1e-9, "kappa={k}");
        }
        assert!((log_norm_const(3, 1.0f64).unwrap() + 2.6924636).abs() < 1e-6);
    }

    #[test]
    fn normalizer_n2_and_uniform_limit() {
        // Ĩ_0(1) by its series Σ 1/(4^k k!²)
        let i0: f64 = (0..30).map(|k| 1.0 / (4f64.powi(k) * (1..=k).map(f64::from).product::<f64>().powi(2))).sum();
        assert!((log_norm_const(2, 1.0).unwrap() + (2.0 * PI * i0).ln()).abs() < 1e-12);
        // surface area of S^{n-1}: 2π^{n/2}/Γ(n/2)
        for n in [2usize, 3, 5, 10] {
            let area = 2.0 * PI.powf(n as f64 / 2.0) / statrs::function::gamma::gamma(n as f64 / 2.0);
            assert!((log_norm_const(n, 1e-8).unwrap() + area.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn density_values() {
        let p = VmfParams::<f64>::new(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let c = log_norm_const(3, 1.0).unwrap();
        assert!((log_density(&[0.0, 0.0, 1.0], &p).unwrap() - (c + 1.0)).abs() < 1e-14);
        assert!((log_density(&[1.0, 0.0, 0.0], &p).unwrap() - c).abs() < 1e-14);
        assert!(log_density(&[1.0, 1.0, 0.0], &p).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let mu: Vec<f64> = sphere::uniform(n, &mut rng);
        let p = VmfParams::new(mu, 3.0).unwrap();
        let area = 2.0 * PI * PI; // S^3
        let vals: Vec<f64> = (0..200_000)
            .map(|_| log_density(&sphere::uniform(n, &mut rng), &p).unwrap().exp() * area)
            .collect();
        let e = crate::stats::Estimate::from_samples(&vals);
        assert!((e.value - 1.0).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn params_validate() {
        assert!(VmfParams::new(vec![1.0], 1.0).is_err());
        assert!(VmfParams::new(vec![1.0, 0.0], 0.0).is_err());
        assert!(VmfParams::new(vec![1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn very_concentrated_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu: Vec<f64> = sphere::uniform(5, &mut rng);
        let s = VmfParams::new(mu.clone(), 1e4).unwrap().sampler();
        let hits = (0..10_000)
            .filter(|_| dot(&s.sample(&mut rng).unwrap(), &mu) > 0.99)
            .count();
        assert!(hits as f64 / 10_000.0 > 0.95);
    }

    #[test]
    fn mean_resultant_length_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (n, kappa) in [(3usize, 2.0f64), (5, 7.0), (10, 1.0), (2, 4.0)] {
            let mu: Vec<f64> = sphere::uniform(n, &mut rng);
            let s = VmfParams::new(mu, kappa).unwrap().sampler();
            let big_n = 40_000;
            let mut acc = vec![0.0; n];
            for _ in 0..big_n {
                for (a, v) in acc.iter_mut().zip(s.sample(&mut rng).unwrap()) {
                    *a += v;
                }
            }
            let r = acc.iter().map(|a| (a / big_n as f64).powi(2)).sum::<f64>().sqrt();
            let want = mean_resultant_length(n, kappa).unwrap();
            assert!((r - want).abs() < 4.0 / (big_n as f64).sqrt(), "n={n}: {r} vs {want}");
        }
    }

    #[test]
    fn cosine_ks_n3() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let kappa = 4.0f64;
        let s = VmfParams::new(vec![0.6, 0.0, 0.8], kappa).unwrap().sampler();
        let ts: Vec<f64> = (0..20_000)
            .map(|_| dot(&s.sample(&mut rng).unwrap(), &[0.6, 0.0, 0.8]))
            .collect();
        let cdf = |t: f64| ((kappa * t).exp() - (-kappa).exp()) / (kappa.exp() - (-kappa).exp());
        let d = ks_statistic(&ts, cdf);
        assert!(ks_p_value(d, ts.len()) > 0.001);
    }

    #[test]
    fn tangent_signs_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = VmfParams::new(vec![1.0, 0.0, 0.0, 0.0], 3.0).unwrap().sampler();
        let mut counts = [0usize; 8];
        let draws = 40_000;
        for _ in 0..draws {
            let u = s.sample(&mut rng).unwrap();
            let idx = (u[1] > 0.0) as usize | ((u[2] > 0.0) as usize) << 1 | ((u[3] > 0.0) as usize) << 2;
            counts[idx] += 1;
        }
        let e = draws as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // χ²_7 upper 1% point
        assert!(chi2 < 18.475, "chi2 = {chi2}");
    }
}
