//! JSON experiment configuration.

use std::path::Path;

use anyhow::{bail, Context};
use msinfer_core::ascent::AscentConfig;
use msinfer_core::infer::Tau;
use msinfer_core::modehunt::BandwidthRule;
use serde::{Deserialize, Serialize};

/// Confidence constructions a coverage run can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Normal,
    Wald,
    Lrt,
    Score,
    Bootstrap,
    EmNormal,
    ModeBall,
    TwoSample,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Normal => "normal",
            Method::Wald => "wald",
            Method::Lrt => "lrt",
            Method::Score => "score",
            Method::Bootstrap => "bootstrap",
            Method::EmNormal => "em-normal",
            Method::ModeBall => "mode-ball",
            Method::TwoSample => "two-sample",
        }
    }
}

/// Initialization distribution over the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitSpec {
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Observations resampled from the data (mode hunting, location models).
    Empirical,
    GaussianFit,
    PointMass { point: Vec<f64> },
}

/// Radii `r0 * factor^k`, `k < count`, for boundary-tube masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub r0: f64,
    pub factor: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One of `normal-location`, `figure1`, `normal-mode`.
    pub fixture: String,
    pub n: usize,
    /// Initializations per fit.
    pub m: usize,
    pub delta: f64,
    pub alpha: f64,
    /// Bootstrap replicates.
    pub b: usize,
    pub trials: usize,
    /// `None` uses the fixture's default box.
    pub init: Option<InitSpec>,
    pub tau: Tau,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub ascent: AscentConfig,
    /// Draws behind the population basin probabilities.
    pub q_draws: usize,
    /// Population EM runs behind the EM basin probability.
    pub em_q_draws: usize,
    pub registry_probes: usize,
    pub permutations: usize,
    pub bandwidth: BandwidthRule,
    /// Cells per axis for the ledger's gap grid and basin map.
    pub ledger_grid: usize,
    pub ledger_radii: Ladder,
    /// Cells per axis for region extraction in the `ci` subcommand.
    pub region_grid: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            fixture: "figure1".into(),
            n: 500,
            m: 3,
            delta: 0.05,
            alpha: 0.05,
            b: 200,
            trials: 100,
            init: None,
            tau: Tau::Coordinate(0),
            methods: vec![Method::Normal, Method::Bootstrap],
            seed: 0,
            ascent: AscentConfig::default(),
            q_draws: 10_000,
            em_q_draws: 2_000,
            registry_probes: 32,
            permutations: 199,
            bandwidth: BandwidthRule::Undersmooth,
            ledger_grid: 20,
            ledger_radii: Ladder { r0: 0.01, factor: 2.0, count: 6 },
            region_grid: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1)");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie in (0, 1)");
        }
        if self.trials == 0 || self.n == 0 || self.m == 0 || self.b == 0 {
            bail!("trials, n, m and b must be at least 1");
        }
        if self.q_draws == 0 || self.em_q_draws == 0 || self.registry_probes == 0 || self.ledger_grid == 0 || self.region_grid == 0 {
            bail!("draw counts and grid sizes must be at least 1");
        }
        let l = &self.ledger_radii;
        if !(l.r0 > 0.0 && l.factor >= 1.0) {
            bail!("ledger radii need r0 > 0 and factor >= 1");
        }
        self.ascent.validate().map_err(anyhow::Error::msg)?;
        Ok(())
    }
}
