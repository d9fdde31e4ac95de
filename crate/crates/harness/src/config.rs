//! Experiment configuration: a TOML file, overridable field by field from the CLI.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use revpref_core::anneal::{default_gamma, SaConfig, SaOutput};
use revpref_core::evaluation::AbLaw;
use revpref_core::posterior::{ChainConfig, PriorBox, ProposalScales};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Setting {
    GaussianMcmc,
    CorruptionSa,
    MomentMatch,
}

impl Setting {
    pub fn label(&self) -> &'static str {
        match self {
            Setting::GaussianMcmc => "gaussian_mcmc",
            Setting::CorruptionSa => "corruption_sa",
            Setting::MomentMatch => "moment_match",
        }
    }
}

/// Price/budget law by its short label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum AbLawName {
    #[serde(rename = "i")]
    #[value(name = "i")]
    Uniform,
    #[serde(rename = "ii")]
    #[value(name = "ii")]
    Discrete,
    #[serde(rename = "iii")]
    #[value(name = "iii")]
    FixedA,
    #[serde(rename = "design_full")]
    #[value(name = "design_full")]
    DesignFull,
    #[serde(rename = "design_budgeted")]
    #[value(name = "design_budgeted")]
    DesignBudgeted,
}

impl AbLawName {
    pub fn resolve(&self, b_lower: f64) -> AbLaw {
        match self {
            AbLawName::Uniform => AbLaw::Uniform,
            AbLawName::Discrete => AbLaw::Discrete,
            AbLawName::FixedA => AbLaw::FixedA,
            AbLawName::DesignFull => AbLaw::DesignFull,
            AbLawName::DesignBudgeted => AbLaw::DesignBudgeted { b_lower },
        }
    }

    pub fn from_law(law: AbLaw) -> Self {
        match law {
            AbLaw::Uniform => AbLawName::Uniform,
            AbLaw::Discrete => AbLawName::Discrete,
            AbLaw::FixedA => AbLawName::FixedA,
            AbLaw::DesignFull => AbLawName::DesignFull,
            AbLaw::DesignBudgeted { .. } => AbLawName::DesignBudgeted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CorruptionName {
    /// Corrupted draws are uniform on the sphere.
    Uniform,
    /// Corrupted draws are vMF around `u*` with concentration `corruption_kappa`.
    Vmf,
}

/// `gamma = "auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Value(f64),
    Keyword(GammaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKeyword {
    Auto,
}

impl GammaSetting {
    pub const AUTO: GammaSetting = GammaSetting::Keyword(GammaKeyword::Auto);

    pub fn resolve(&self, n: usize, t: usize) -> f64 {
        match *self {
            GammaSetting::Value(g) => g,
            GammaSetting::Keyword(GammaKeyword::Auto) => default_gamma(n, t),
        }
    }
}

impl std::str::FromStr for GammaSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaSetting::AUTO);
        }
        s.parse::<f64>().map(GammaSetting::Value).map_err(|e| format!("gamma must be \"auto\" or a number: {e}"))
    }
}

/// Which point of the Metropolis–Hastings chain is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ChainEstimate {
    /// The last state `θ^(K)`.
    Final,
    /// Normalized mean of `μ` over the trace after burn-in.
    PosteriorMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SaOutputName {
    Incumbent,
    Final,
}

/// How the ground truth of each trial is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    /// `κ*` is uniform on `[kappa_min, kappa_max]` (Gaussian setting).
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Fixed `κ*` for moment matching; drawn like the Gaussian setting when absent.
    pub kappa: Option<f64>,
    pub delta: f64,
    pub corruption: CorruptionName,
    pub corruption_kappa: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self { kappa_min: 1.0, kappa_max: 10.0, kappa: None, delta: 0.1, corruption: CorruptionName::Uniform, corruption_kappa: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    pub samples_per_theta: usize,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub sigma_mu: Option<f64>,
    pub sigma_kappa: Option<f64>,
    pub estimate: ChainEstimate,
    /// Steps discarded before averaging; half the chain when absent.
    pub burn_in: Option<usize>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            samples_per_theta: 1024,
            kappa_lo: 0.5,
            kappa_hi: 20.0,
            sigma_mu: None,
            sigma_kappa: None,
            estimate: ChainEstimate::PosteriorMean,
            burn_in: None,
        }
    }
}

impl McmcConfig {
    pub fn chain_config(&self, n: usize) -> anyhow::Result<ChainConfig<f64>> {
        let prior = PriorBox::new(self.kappa_lo, self.kappa_hi)?;
        let defaults = ProposalScales::default_for(n, &prior);
        let scales = ProposalScales {
            sigma_mu: self.sigma_mu.unwrap_or(defaults.sigma_mu),
            sigma_kappa: self.sigma_kappa.unwrap_or(defaults.sigma_kappa),
        };
        if !(scales.sigma_mu > 0.0 && scales.sigma_kappa > 0.0) {
            bail!("proposal scales must be positive");
        }
        if self.samples_per_theta == 0 {
            bail!("samples_per_theta must be at least 1");
        }
        Ok(ChainConfig { prior, scales, samples_per_theta: self.samples_per_theta })
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaSettings {
    pub iterations: usize,
    pub eta0: f64,
    pub reduction: f64,
    pub interval: usize,
    pub gamma: GammaSetting,
    pub sigma_u: Option<f64>,
    pub output: SaOutputName,
}

impl Default for SaSettings {
    fn default() -> Self {
        Self {
            iterations: 1000,
            eta0: 5.0,
            reduction: 0.9,
            interval: 25,
            gamma: GammaSetting::AUTO,
            sigma_u: None,
            output: SaOutputName::Incumbent,
        }
    }
}

impl SaSettings {
    pub fn sa_config(&self, n: usize, t: usize) -> anyhow::Result<SaConfig<f64>> {
        let defaults = SaConfig::<f64>::default_for(n, t);
        let config = SaConfig {
            iterations: self.iterations,
            eta0: self.eta0,
            reduction: self.reduction,
            interval: self.interval,
            gamma: self.gamma.resolve(n, t),
            sigma_u: self.sigma_u.unwrap_or(defaults.sigma_u),
            output: match self.output {
                SaOutputName::Incumbent => SaOutput::Incumbent,
                SaOutputName::Final => SaOutput::Final,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Fresh `(a, b)` draws for the Gaussian prediction metric.
    pub draws: usize,
    /// Fresh observations for each `Acc` estimate.
    pub acc_draws: usize,
    /// Price law used to score moment-matching estimates.
    pub moment_ab_law: AbLawName,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { draws: 10_000, acc_draws: 100_000, moment_ab_law: AbLawName::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub n: usize,
    pub ab_law: AbLawName,
    /// Lower budget bound for `design_budgeted`.
    pub b_lower: f64,
    /// Observations per trial (`T`).
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub truth: TruthConfig,
    pub mcmc: McmcConfig,
    pub sa: SaSettings,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::GaussianMcmc,
            n: 3,
            ab_law: AbLawName::Uniform,
            b_lower: 2.0,
            samples: 200,
            trials: 20,
            seed: 0,
            output: None,
            truth: TruthConfig::default(),
            mcmc: McmcConfig::default(),
            sa: SaSettings::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn ab_law(&self) -> AbLaw {
        self.ab_law.resolve(self.b_lower)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n < 2 {
            bail!("n must be at least 2, got {}", self.n);
        }
        if self.samples == 0 {
            bail!("samples (T) must be at least 1");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.ab_law == AbLawName::DesignBudgeted && !(self.b_lower >= 1.0) {
            bail!("b_lower must be >= 1, got {}", self.b_lower);
        }
        let t = &self.truth;
        if !(t.kappa_min > 0.0 && t.kappa_max >= t.kappa_min) {
            bail!("need 0 < kappa_min <= kappa_max");
        }
        if let Some(k) = t.kappa {
            if !(k > 0.0) {
                bail!("truth kappa must be positive");
            }
        }
        if !(0.0..=1.0).contains(&t.delta) {
            bail!("delta must lie in [0, 1]");
        }
        if self.eval.draws == 0 || self.eval.acc_draws == 0 {
            bail!("evaluation draws must be positive");
        }
        match self.setting {
            Setting::GaussianMcmc => {
                self.mcmc.chain_config(self.n)?;
            }
            Setting::CorruptionSa => {
                self.sa.sa_config(self.n, self.samples)?;
            }
            Setting::MomentMatch => {}
        }
        Ok(())
    }
}
