use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use revpref::config::{
    AbLawName, ChainEstimate, CorruptionName, ExperimentConfig, GammaSetting, SaOutputName, Setting,
};
use revpref::dataset::{Dataset, Sidecar, Truth};
use revpref::experiment::{
    estimate_corruption, estimate_gaussian, estimate_moment, generate_dataset, run_experiment, utility_law,
};
use revpref::table1::{reproduce_table1, timing_path, Scale};
use revpref_core::consistency::{count_consistent, ConsistencySet};
use revpref_core::evaluation::{acc, distance_curve, gaussian_pred_accuracy, Scenario};
use revpref_core::vmf::VmfParams;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "revpref", version, about = "Estimate stochastic utilities from budgeted purchase data")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one trial's dataset (and its private ground-truth sidecar).
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trial index used for seed derivation.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Dataset file (JSON Lines).
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar; defaults to `<out>.truth.jsonl`.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Also write the observations as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run every trial of an experiment and write the per-trial results CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Metropolis–Hastings posterior estimate of (μ, κ) from a dataset.
    EstimateGaussian {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Write the chain trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Simulated-annealing estimate of u* from a dataset.
    EstimateCorruption {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Write the annealing trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Moment-matching estimate of μ from a sign-revealing design, κ known.
    EstimateMoment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kappa: f64,
    },
    /// Score an estimate against the ground truth in a sidecar.
    Evaluate {
        /// Estimate file written by one of the estimate-* commands.
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long, value_enum, default_value = "i")]
        ab_law: AbLawName,
        #[arg(long, default_value_t = 2.0)]
        b_lower: f64,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Reproduce the settings × price laws × dimensions results grid.
    ReproduceTable1 {
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Coupled mismatch probability as a function of parameter distance.
    DiagnoseDistance {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, value_enum, default_value = "i")]
        ab_law: AbLawName,
        #[arg(long, default_value_t = 2.0)]
        b_lower: f64,
        #[arg(long, default_value_t = 5.0)]
        kappa: f64,
        /// Number of evenly spaced distances up to `--max-distance`.
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long, default_value_t = 1.0)]
        max_distance: f64,
        #[arg(long, default_value_t = 20_000)]
        draws: usize,
        #[arg(long)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Overrides for [`ExperimentConfig`]; flags win over the `--config` file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    setting: Option<Setting>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    ab_law: Option<AbLawName>,
    #[arg(long)]
    b_lower: Option<f64>,
    /// Observations per trial (T).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Results CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    kappa_min: Option<f64>,
    #[arg(long)]
    kappa_max: Option<f64>,
    /// Fixed true κ (moment matching).
    #[arg(long)]
    truth_kappa: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    corruption: Option<CorruptionName>,
    #[arg(long)]
    corruption_kappa: Option<f64>,
    /// Estimator iterations (K), for both MCMC and annealing.
    #[arg(long)]
    iterations: Option<usize>,
    /// Monte Carlo draws per likelihood evaluation (M).
    #[arg(long)]
    samples_per_theta: Option<usize>,
    #[arg(long)]
    kappa_lo: Option<f64>,
    #[arg(long)]
    kappa_hi: Option<f64>,
    #[arg(long)]
    sigma_mu: Option<f64>,
    #[arg(long)]
    sigma_kappa: Option<f64>,
    #[arg(long, value_enum)]
    estimate: Option<ChainEstimate>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    /// Temperature reduction rate (c).
    #[arg(long)]
    reduction: Option<f64>,
    /// Steps between temperature cuts (τ).
    #[arg(long)]
    interval: Option<usize>,
    /// Margin: "auto" or a number.
    #[arg(long)]
    gamma: Option<GammaSetting>,
    #[arg(long)]
    sigma_u: Option<f64>,
    #[arg(long, value_enum)]
    sa_output: Option<SaOutputName>,
    /// Fresh draws for the prediction metric.
    #[arg(long)]
    draws: Option<usize>,
    /// Fresh observations per Acc estimate.
    #[arg(long)]
    acc_draws: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            setting => setting, n => n, ab_law => ab_law, b_lower => b_lower, samples => samples,
            trials => trials, seed => seed, kappa_min => truth.kappa_min, kappa_max => truth.kappa_max,
            delta => truth.delta, corruption => truth.corruption, corruption_kappa => truth.corruption_kappa,
            samples_per_theta => mcmc.samples_per_theta, kappa_lo => mcmc.kappa_lo, kappa_hi => mcmc.kappa_hi,
            estimate => mcmc.estimate, eta0 => sa.eta0, reduction => sa.reduction, interval => sa.interval,
            gamma => sa.gamma, sa_output => sa.output, draws => eval.draws, acc_draws => eval.acc_draws,
        );
        if let Some(k) = self.iterations {
            c.mcmc.iterations = k;
            c.sa.iterations = k;
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        if self.truth_kappa.is_some() {
            c.truth.kappa = self.truth_kappa;
        }
        if self.sigma_mu.is_some() {
            c.mcmc.sigma_mu = self.sigma_mu;
        }
        if self.sigma_kappa.is_some() {
            c.mcmc.sigma_kappa = self.sigma_kappa;
        }
        if self.burn_in.is_some() {
            c.mcmc.burn_in = self.burn_in;
        }
        if self.sigma_u.is_some() {
            c.sa.sigma_u = self.sigma_u;
        }
        Ok(c)
    }

    /// Configuration for estimating from an existing dataset.
    fn for_dataset(&self, data: &Dataset) -> anyhow::Result<ExperimentConfig> {
        let mut c = self.resolve()?;
        c.n = data.header.n;
        c.samples = data.header.count.max(1);
        Ok(c)
    }
}

/// What the estimate-* commands print and `evaluate` reads back.
#[derive(Debug, Serialize, Deserialize)]
struct EstimateReport {
    setting: String,
    direction: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    p_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    degenerate: Option<bool>,
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn default_sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".truth.jsonl");
    out.with_file_name(name)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { config, trial, out, sidecar, csv } => {
            let c = config.resolve()?;
            let g = generate_dataset(&c, trial)?;
            g.dataset.save(&out)?;
            let sidecar = sidecar.unwrap_or_else(|| default_sidecar(&out));
            g.sidecar.save(&sidecar)?;
            if let Some(p) = csv {
                let mut w = create(&p)?;
                g.dataset.write_csv(&mut w)?;
                w.flush()?;
            }
            log::info!("wrote {} observations to {} (truth in {})", c.samples, out.display(), sidecar.display());
        }
        Command::Run { config } => {
            let c = config.resolve()?;
            let result = run_experiment(&c)?;
            match &c.output {
                Some(p) => {
                    let mut w = create(p)?;
                    result.write_csv(&mut w, true)?;
                    w.flush()?;
                }
                None => result.write_csv(std::io::stdout().lock(), true)?,
            }
            if let Some(s) = result.summary() {
                log::info!("mean metric {:.4} ± {:.4}, {} failed trials", s.value, s.stderr, result.failures());
            }
        }
        Command::EstimateGaussian { config, data, trace } => {
            let dataset = Dataset::load(&data)?;
            let mut c = config.for_dataset(&dataset)?;
            c.setting = Setting::GaussianMcmc;
            c.validate()?;
            let (est, state) = estimate_gaussian(&c, &dataset.observations()?, c.seed)?;
            if let Some(p) = trace {
                let mut w = create(&p)?;
                state.write_trace_csv(&mut w)?;
                w.flush()?;
            }
            print_json(&EstimateReport {
                setting: c.setting.label().into(),
                direction: est.direction,
                kappa: est.kappa,
                acceptance_rate: Some(state.acceptance_rate()),
                count: None,
                p_hat: None,
                degenerate: None,
            })?;
        }
        Command::EstimateCorruption { config, data, trace } => {
            let dataset = Dataset::load(&data)?;
            let mut c = config.for_dataset(&dataset)?;
            c.setting = Setting::CorruptionSa;
            c.validate()?;
            let (est, run) = estimate_corruption(&c, &dataset.observations()?, c.seed)?;
            if let Some(p) = trace {
                let mut w = create(&p)?;
                run.write_trace_csv(&mut w)?;
                w.flush()?;
            }
            let sets: Vec<ConsistencySet<f64>> = dataset.observations()?.iter().map(ConsistencySet::build).collect();
            let gamma = c.sa.gamma.resolve(c.n, c.samples);
            print_json(&EstimateReport {
                setting: c.setting.label().into(),
                count: Some(count_consistent(&sets, &est.direction, gamma)),
                direction: est.direction,
                kappa: None,
                acceptance_rate: None,
                p_hat: None,
                degenerate: None,
            })?;
        }
        Command::EstimateMoment { data, kappa } => {
            let dataset = Dataset::load(&data)?;
            let est = estimate_moment(dataset.header.n, kappa, &dataset.observations()?)?;
            print_json(&EstimateReport {
                setting: Setting::MomentMatch.label().into(),
                direction: est.mu,
                kappa: Some(kappa),
                acceptance_rate: None,
                count: None,
                p_hat: Some(est.p_hat),
                degenerate: Some(est.degenerate),
            })?;
        }
        Command::Evaluate { estimate, sidecar, ab_law, b_lower, draws, seed } => {
            let text = std::fs::read_to_string(&estimate).with_context(|| format!("reading {}", estimate.display()))?;
            let report: EstimateReport = serde_json::from_str(&text).context("parsing estimate")?;
            let truth = Sidecar::load(&sidecar)?.truth;
            let law = ab_law.resolve(b_lower);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let value = match &truth {
                Truth::Vmf { mu, .. } => {
                    let e = gaussian_pred_accuracy(&report.direction, mu, law, draws, &mut rng)?;
                    serde_json::json!({ "metric": "prediction_accuracy", "value": e.value, "stderr": e.stderr })
                }
                Truth::DeltaCorrupt { u_star, .. } => {
                    let scenario = Scenario::new(law, utility_law(&truth)?, seed)?;
                    let a_hat = acc(&report.direction, &scenario, draws, &mut ChaCha8Rng::seed_from_u64(seed))?;
                    let a_star = acc(u_star, &scenario, draws, &mut ChaCha8Rng::seed_from_u64(seed))?;
                    serde_json::json!({
                        "metric": "acc_ratio",
                        "value": a_hat.value / a_star.value,
                        "acc_estimate": a_hat.value,
                        "acc_truth": a_star.value,
                    })
                }
            };
            print_json(&value)?;
        }
        Command::ReproduceTable1 { scale, output, seed } => {
            let cells = reproduce_table1(&output, scale, seed)?;
            let failed: usize = cells.iter().map(|c| c.failures).sum();
            log::info!("wrote {} cells to {} (timing in {})", cells.len(), output.display(), timing_path(&output).display());
            if failed > 0 {
                log::warn!("{failed} trials failed; see the failures column");
            }
        }
        Command::DiagnoseDistance { n, ab_law, b_lower, kappa, bins, max_distance, draws, seed, output } => {
            if bins == 0 || !(max_distance > 0.0 && max_distance <= 2.0) {
                bail!("need bins >= 1 and 0 < max-distance <= 2");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(revpref::seed::derive_seed(seed, 0, "truth"));
            let theta = VmfParams::new(revpref_core::sphere::uniform(n, &mut rng), kappa)?;
            let distances: Vec<f64> = (1..=bins).map(|i| max_distance * i as f64 / bins as f64).collect();
            let curve = distance_curve(&theta, ab_law.resolve(b_lower), &distances, draws, seed)?;
            match output {
                Some(p) => {
                    let mut w = create(&p)?;
                    curve.write_csv(&mut w)?;
                    w.flush()?;
                }
                None => curve.write_csv(std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
