//! The results grid: two settings × three price laws × dimensions.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use revpref_core::evaluation::AbLaw;

use crate::config::{AbLawName, ExperimentConfig, Setting};
use crate::experiment::run_experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    /// n = 3, three trials, short chains: a quick end-to-end check.
    Smoke,
    /// n ∈ {3, 5}, 20 trials, T = 200, K = 1000, M = 1024.
    Desk,
    /// Desk settings over n ∈ {3, 5, 10, 25}.
    Full,
}

impl Scale {
    pub fn dimensions(&self) -> &'static [usize] {
        match self {
            Scale::Smoke => &[3],
            Scale::Desk => &[3, 5],
            Scale::Full => &[3, 5, 10, 25],
        }
    }

    /// Configuration of one cell at this scale.
    pub fn cell_config(&self, setting: Setting, law: AbLaw, n: usize, seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig { setting, n, ab_law: AbLawName::from_law(law), seed, ..Default::default() };
        if *self == Scale::Smoke {
            c.samples = 50;
            c.trials = 3;
            c.mcmc.iterations = 100;
            c.mcmc.samples_per_theta = 128;
            c.sa.iterations = 200;
            c.eval.draws = 1000;
            c.eval.acc_draws = 5000;
        }
        c
    }

    /// Every cell in output order.
    pub fn cells(&self, seed: u64) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for setting in [Setting::GaussianMcmc, Setting::CorruptionSa] {
            for law in AbLaw::TABLE {
                for &n in self.dimensions() {
                    out.push(self.cell_config(setting, law, n, cell_seed(seed, setting, law, n)));
                }
            }
        }
        out
    }
}

fn cell_seed(master: u64, setting: Setting, law: AbLaw, n: usize) -> u64 {
    crate::seed::derive_seed(master, n as u64, &format!("cell/{}/{}", setting.label(), law.label()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub setting: Setting,
    pub scenario: &'static str,
    pub n: usize,
    pub samples: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean: f64,
    pub stderr: f64,
    pub wall_ms: u128,
}

/// Sidecar path holding the per-cell wall times.
pub fn timing_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".timing.csv");
    output.with_file_name(name)
}

/// Runs the grid, appending and flushing one row per finished cell so an
/// interrupted run keeps its completed cells. Wall times go to
/// [`timing_path`] so the main CSV is reproducible.
pub fn reproduce_table1(output: &Path, scale: Scale, seed: u64) -> anyhow::Result<Vec<CellSummary>> {
    let mut csv = std::fs::File::create(output).with_context(|| format!("creating {}", output.display()))?;
    let tpath = timing_path(output);
    let mut timing = std::fs::File::create(&tpath).with_context(|| format!("creating {}", tpath.display()))?;
    writeln!(csv, "setting,scenario,n,T,trials,failures,mean,stderr")?;
    writeln!(timing, "setting,scenario,n,wall_ms")?;
    csv.flush()?;
    timing.flush()?;
    let mut out = Vec::new();
    for config in scale.cells(seed) {
        let start = Instant::now();
        let result = run_experiment(&config)?;
        let wall_ms = start.elapsed().as_millis();
        let (mean, stderr) = result.summary().map(|s| (s.value, s.stderr)).unwrap_or((f64::NAN, f64::NAN));
        let cell = CellSummary {
            setting: config.setting,
            scenario: config.ab_law().label(),
            n: config.n,
            samples: config.samples,
            trials: config.trials,
            failures: result.failures(),
            mean,
            stderr,
            wall_ms,
        };
        log::info!("{} {} n={}: mean {:.4} ± {:.4} ({} ms)", cell.setting.label(), cell.scenario, cell.n, mean, stderr, wall_ms);
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            cell.setting.label(),
            cell.scenario,
            cell.n,
            cell.samples,
            cell.trials,
            cell.failures,
            cell.mean,
            cell.stderr
        )?;
        writeln!(timing, "{},{},{},{}", cell.setting.label(), cell.scenario, cell.n, wall_ms)?;
        csv.flush()?;
        timing.flush()?;
        out.push(cell);
    }
    Ok(out)
}
