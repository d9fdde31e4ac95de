//! The same pipeline in `f32` and `f64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use revpref_core::anneal::{run_sa, SaConfig};
use revpref_core::consistency::{ConsistencySet, Observation};
use revpref_core::evaluation::{AbLaw, Scenario, UtilityLaw};
use revpref_core::knapsack::{solve, Instance};
use revpref_core::moment::{invert_marginal, marginal_positive_prob};
use revpref_core::posterior::{run_chain, ChainConfig};
use revpref_core::vmf::VmfParams;
use revpref_core::Real;

fn pipeline<T: Real>() -> (Vec<T>, Vec<T>, Vec<T>) {
    let mu: Vec<T> = [0.6, 0.0, 0.8].iter().map(|&v| T::lit(v)).collect();
    let theta = VmfParams::new(mu.clone(), T::lit(6.0)).unwrap();
    let scenario = Scenario::new(AbLaw::Uniform, UtilityLaw::Vmf(theta), 3).unwrap();
    let (obs, us) = scenario.generate(60).unwrap();
    let sets: Vec<ConsistencySet<T>> = obs.iter().map(ConsistencySet::build).collect();
    for (s, u) in sets.iter().zip(&us) {
        assert!(s.contains(u, T::zero()).unwrap());
    }
    let mut config = ChainConfig::default_for(3);
    config.samples_per_theta = 128;
    let chain = run_chain(&sets, 200, &config, 5).unwrap();
    let sa = run_sa(3, &sets, &SaConfig::default_for(3, 60), 5).unwrap();
    (mu, chain.mean_direction(100), sa.u_hat)
}

fn dist<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y).to_f64_lossy().powi(2)).sum::<f64>().sqrt()
}

#[test]
fn estimators_run_in_both_precisions() {
    let (mu, chain, sa) = pipeline::<f64>();
    assert!(dist(&mu, &chain) < 0.5 && dist(&mu, &sa) < 0.5);
    let (mu, chain, sa) = pipeline::<f32>();
    assert!(dist(&mu, &chain) < 0.5 && dist(&mu, &sa) < 0.5);
}

#[test]
fn knapsack_and_consistency_agree_across_precisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in 0..500 {
        let (a, b): (Vec<f64>, f64) = AbLaw::Discrete.draw(4, t, &mut rng);
        let u: Vec<f64> = revpref_core::sphere::uniform(4, &mut rng);
        let x64 = solve(&Instance::new(u.clone(), a.clone(), b).unwrap()).x.into_inner();
        let u32v: Vec<f32> = u.iter().map(|&v| v as f32).collect();
        let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        let x32 = solve(&Instance::new(u32v.clone(), a32.clone(), b as f32).unwrap()).x.into_inner();
        for (p, q) in x64.iter().zip(&x32) {
            assert!((p - *q as f64).abs() < 1e-4);
        }
        let set = ConsistencySet::build(&Observation::new(x32, a32, b as f32).unwrap());
        assert!(set.contains(&u32v, 0.0).unwrap());
    }
}

#[test]
fn marginal_inversion_in_f32() {
    for &m in &[-0.7f32, -0.2, 0.0, 0.35, 0.9] {
        let p = marginal_positive_prob(m, 4.0f32, 4).unwrap();
        let back = invert_marginal(p, 4.0f32, 4).unwrap();
        assert!((back - m).abs() < 1e-3, "{m} -> {p} -> {back}");
    }
}
