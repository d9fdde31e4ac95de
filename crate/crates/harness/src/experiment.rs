//! Dataset generation and the per-trial estimation pipeline.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use revpref_core::anneal::run_sa;
use revpref_core::consistency::{ConsistencySet, Observation};
use revpref_core::evaluation::{acc, gaussian_pred_accuracy, AbLaw, CorruptionLaw, Scenario, UtilityLaw};
use revpref_core::moment::{estimate_mu, DesignedObservation};
use revpref_core::posterior::run_chain_n;
use revpref_core::sphere;
use revpref_core::stats::Estimate;
use revpref_core::vmf::VmfParams;

use crate::config::{ChainEstimate, CorruptionName, ExperimentConfig, Setting};
use crate::dataset::{Dataset, Sidecar, Truth};
use crate::seed::derive_seed;

/// Everything generated for one trial.
#[derive(Debug, Clone)]
pub struct GeneratedTrial {
    pub scenario: Scenario<f64>,
    pub observations: Vec<Observation<f64>>,
    pub dataset: Dataset,
    pub sidecar: Sidecar,
}

/// Direction uniform on the sphere, conditioned on having a positive
/// coordinate so that the true optimum has positive value.
fn draw_direction<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mu: Vec<f64> = sphere::uniform(n, rng);
        if mu.iter().any(|&m| m > 0.0) {
            return mu;
        }
    }
}

pub fn draw_truth(config: &ExperimentConfig, trial: u64) -> Truth {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, trial, "truth"));
    let n = config.n;
    let t = &config.truth;
    let mut kappa = || if t.kappa_max > t.kappa_min { rng.random_range(t.kappa_min..t.kappa_max) } else { t.kappa_min };
    match config.setting {
        Setting::GaussianMcmc => {
            let k = kappa();
            Truth::Vmf { mu: draw_direction(n, &mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, trial, "truth_mu"))), kappa: k }
        }
        Setting::MomentMatch => {
            let k = t.kappa.unwrap_or_else(kappa);
            Truth::Vmf { mu: draw_direction(n, &mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, trial, "truth_mu"))), kappa: k }
        }
        Setting::CorruptionSa => Truth::DeltaCorrupt {
            u_star: sphere::uniform(n, &mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, trial, "truth_mu"))),
            delta: t.delta,
            corruption: match t.corruption {
                CorruptionName::Uniform => "uniform".into(),
                CorruptionName::Vmf => "vmf".into(),
            },
            corruption_kappa: match t.corruption {
                CorruptionName::Uniform => None,
                CorruptionName::Vmf => Some(t.corruption_kappa),
            },
        },
    }
}

pub fn utility_law(truth: &Truth) -> anyhow::Result<UtilityLaw<f64>> {
    Ok(match truth {
        Truth::Vmf { mu, kappa } => UtilityLaw::Vmf(VmfParams::new(mu.clone(), *kappa)?),
        Truth::DeltaCorrupt { u_star, delta, corruption, corruption_kappa } => {
            let corruption = match corruption.as_str() {
                "uniform" => CorruptionLaw::UniformSphere,
                "vmf" => {
                    let k = corruption_kappa.context("vmf corruption needs corruption_kappa")?;
                    CorruptionLaw::Vmf(VmfParams::new(u_star.clone(), k)?)
                }
                other => bail!("unknown corruption law {other:?}"),
            };
            UtilityLaw::DeltaCorrupt { u_star: u_star.clone(), delta: *delta, corruption }
        }
    })
}

pub fn scenario_label(config: &ExperimentConfig) -> String {
    format!("{}/{}", config.setting.label(), config.ab_law().label())
}

/// Draws the ground truth and the `T` observations of one trial.
pub fn generate_dataset(config: &ExperimentConfig, trial: u64) -> anyhow::Result<GeneratedTrial> {
    config.validate()?;
    let truth = draw_truth(config, trial);
    let seed = derive_seed(config.seed, trial, "dataset");
    let scenario = Scenario::new(config.ab_law(), utility_law(&truth)?, seed)?;
    let (observations, utilities) = scenario.generate(config.samples)?;
    let dataset = Dataset::new(scenario_label(config), seed, config.n, &observations);
    Ok(GeneratedTrial { scenario, observations, dataset, sidecar: Sidecar { truth, utilities } })
}

/// Point estimate and (for the Gaussian setting) the concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub direction: Vec<f64>,
    pub kappa: Option<f64>,
}

pub fn estimate_gaussian(
    config: &ExperimentConfig,
    observations: &[Observation<f64>],
    seed: u64,
) -> anyhow::Result<(PointEstimate, revpref_core::posterior::ChainState<f64>)> {
    let sets: Vec<ConsistencySet<f64>> = observations.iter().map(ConsistencySet::build).collect();
    let chain_config = config.mcmc.chain_config(config.n)?;
    let state = run_chain_n(config.n, &sets, config.mcmc.iterations, &chain_config, seed)?;
    let est = match config.mcmc.estimate {
        ChainEstimate::Final => PointEstimate { direction: state.theta.mu().to_vec(), kappa: Some(state.theta.kappa()) },
        ChainEstimate::PosteriorMean => {
            let burn = config.mcmc.burn_in();
            PointEstimate { direction: state.mean_direction(burn), kappa: Some(state.mean_kappa(burn)) }
        }
    };
    Ok((est, state))
}

pub fn estimate_corruption(
    config: &ExperimentConfig,
    observations: &[Observation<f64>],
    seed: u64,
) -> anyhow::Result<(PointEstimate, revpref_core::anneal::SaRun<f64>)> {
    let sets: Vec<ConsistencySet<f64>> = observations.iter().map(ConsistencySet::build).collect();
    let sa_config = config.sa.sa_config(config.n, observations.len())?;
    let run = run_sa(config.n, &sets, &sa_config, seed)?;
    Ok((PointEstimate { direction: run.u_hat.clone(), kappa: None }, run))
}

pub fn estimate_moment(
    n: usize,
    kappa: f64,
    observations: &[Observation<f64>],
) -> anyhow::Result<revpref_core::moment::MomentEstimate<f64>> {
    let data: Vec<DesignedObservation<f64>> = observations
        .iter()
        .map(|o| DesignedObservation::from_prices(o.prices(), o.bundle().to_vec()))
        .collect();
    Ok(estimate_mu(&data, kappa, n)?)
}

/// `Acc(û) / Acc(u*)`, both estimated on the same stream of fresh observations.
pub fn acc_ratio(u_hat: &[f64], u_star: &[f64], scenario: &Scenario<f64>, draws: usize, seed: u64) -> anyhow::Result<f64> {
    let a_hat = acc(u_hat, scenario, draws, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let a_star = acc(u_star, scenario, draws, &mut ChaCha8Rng::seed_from_u64(seed))?;
    if a_star.value == 0.0 {
        bail!("Acc(u*) estimated as zero");
    }
    Ok(a_hat.value / a_star.value)
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: u64,
    pub metric: Result<f64, String>,
    pub estimate: Option<PointEstimate>,
    pub truth: Truth,
    pub wall_ms: u128,
}

impl TrialOutcome {
    /// `‖μ̂ − μ*‖₂` when both exist.
    pub fn estimate_error(&self) -> Option<f64> {
        let est = self.estimate.as_ref()?;
        let target = match &self.truth {
            Truth::Vmf { mu, .. } => mu,
            Truth::DeltaCorrupt { u_star, .. } => u_star,
        };
        Some(sphere::distance(&est.direction, target))
    }
}

fn trial_pipeline(config: &ExperimentConfig, trial: u64) -> anyhow::Result<(f64, PointEstimate)> {
    let generated = generate_dataset(config, trial)?;
    let est_seed = derive_seed(config.seed, trial, "estimator");
    let metric_seed = derive_seed(config.seed, trial, "metric");
    let obs = &generated.observations;
    match (config.setting, &generated.sidecar.truth) {
        (Setting::GaussianMcmc, Truth::Vmf { mu, .. }) => {
            let (est, _) = estimate_gaussian(config, obs, est_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(metric_seed);
            let m = gaussian_pred_accuracy(&est.direction, mu, config.ab_law(), config.eval.draws, &mut rng)?;
            Ok((m.value, est))
        }
        (Setting::CorruptionSa, Truth::DeltaCorrupt { u_star, .. }) => {
            let (est, _) = estimate_corruption(config, obs, est_seed)?;
            let m = acc_ratio(&est.direction, u_star, &generated.scenario, config.eval.acc_draws, metric_seed)?;
            Ok((m, est))
        }
        (Setting::MomentMatch, Truth::Vmf { mu, kappa }) => {
            if !matches!(config.ab_law(), AbLaw::DesignFull | AbLaw::DesignBudgeted { .. }) {
                bail!("moment matching needs a sign-revealing design (design_full or design_budgeted)");
            }
            let m_est = estimate_moment(config.n, *kappa, obs)?;
            let est = PointEstimate { direction: m_est.mu, kappa: Some(*kappa) };
            let eval_law = config.eval.moment_ab_law.resolve(config.b_lower);
            let mut rng = ChaCha8Rng::seed_from_u64(metric_seed);
            let m = gaussian_pred_accuracy(&est.direction, mu, eval_law, config.eval.draws, &mut rng)?;
            Ok((m.value, est))
        }
        _ => unreachable!("truth is drawn to match the setting"),
    }
}

/// Runs one trial; failures are captured in the outcome.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> TrialOutcome {
    let start = Instant::now();
    let result = trial_pipeline(config, trial);
    let wall_ms = start.elapsed().as_millis();
    let truth = draw_truth(config, trial);
    match result {
        Ok((metric, est)) => TrialOutcome { trial, metric: Ok(metric), estimate: Some(est), truth, wall_ms },
        Err(e) => {
            log::warn!("trial {trial} failed: {e:#}");
            TrialOutcome { trial, metric: Err(format!("{e:#}")), estimate: None, truth, wall_ms }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialOutcome>,
}

impl ExperimentResult {
    /// Mean and standard error over the successful trials.
    pub fn summary(&self) -> Option<Estimate> {
        let ok: Vec<f64> = self.trials.iter().filter_map(|t| t.metric.as_ref().ok().copied()).collect();
        (!ok.is_empty()).then(|| Estimate::from_samples(&ok))
    }

    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.metric.is_err()).count()
    }

    /// Per-trial rows followed by a `mean` row. With `timing = false` the
    /// `wall_ms` column is left empty so the file is reproducible.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> std::io::Result<()> {
        writeln!(w, "setting,scenario,n,T,trial,metric,wall_ms")?;
        let c = &self.config;
        let prefix = format!("{},{},{},{}", c.setting.label(), c.ab_law().label(), c.n, c.samples);
        for t in &self.trials {
            let metric = t.metric.as_ref().map(|m| m.to_string()).unwrap_or_else(|_| "NaN".into());
            let wall = if timing { t.wall_ms.to_string() } else { String::new() };
            writeln!(w, "{prefix},{},{metric},{wall}", t.trial)?;
        }
        let mean = self.summary().map(|s| s.value.to_string()).unwrap_or_else(|| "NaN".into());
        let total = if timing { self.trials.iter().map(|t| t.wall_ms).sum::<u128>().to_string() } else { String::new() };
        writeln!(w, "{prefix},mean,{mean},{total}")
    }
}

/// Runs all trials in parallel; results are ordered by trial index.
pub fn run_experiment(config: &ExperimentConfig) -> anyhow::Result<ExperimentResult> {
    config.validate()?;
    let trials = (0..config.trials as u64).into_par_iter().map(|t| run_trial(config, t)).collect();
    Ok(ExperimentResult { config: config.clone(), trials })
}
