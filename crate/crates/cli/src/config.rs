//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stc_core::nn_estimator::{EtaRule, Fallback};
use stc_core::tensor_model::{FactorFamily, WeightKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Orthogonal CP, factor means bounded away from zero, uniform weights.
    OrthogonalBoundedMeans,
    /// Orthogonal CP, zero-mean factors, random latent-combination weights.
    OrthogonalZeroMeans,
    /// Tucker model with a dense core.
    GeneralTucker,
    /// Planted ±1 parity instance.
    XorHardness,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::OrthogonalBoundedMeans => "orthogonal_bounded_means",
            Regime::OrthogonalZeroMeans => "orthogonal_zero_means",
            Regime::GeneralTucker => "general_tucker",
            Regime::XorHardness => "xor_hardness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Constant,
    Cosine,
    ShiftedCosine,
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightName {
    Uniform,
    RandomLatentCombination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EtaRuleName {
    #[default]
    Algorithm,
    Analysis,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FallbackName {
    #[default]
    GlobalMean,
    Unestimated,
}

fn default_t() -> usize {
    3
}
fn default_r() -> usize {
    1
}
fn default_multipliers() -> Vec<f64> {
    vec![1.0]
}
fn default_weight_range() -> [f64; 2] {
    [0.5, 1.0]
}
fn default_metric_samples() -> usize {
    20_000
}
fn default_dense_limit() -> usize {
    8_000_000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: Regime,
    #[serde(default = "default_t")]
    pub t: usize,
    pub n_list: Vec<usize>,
    #[serde(default = "default_r")]
    pub r: usize,
    pub kappa: f64,
    #[serde(default)]
    pub noise_amplitude: f64,
    /// Defaults per regime when absent.
    #[serde(default)]
    pub family: Option<FamilyName>,
    #[serde(default)]
    pub weight_kind: Option<WeightName>,
    #[serde(default = "default_weight_range")]
    pub weight_range: [f64; 2],
    #[serde(default)]
    pub eta_rule: EtaRuleName,
    /// Multipliers swept for the algorithm and analysis rules; the best by
    /// MSE is reported.
    #[serde(default = "default_multipliers")]
    pub eta_multipliers: Vec<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub fallback: FallbackName,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Planted-assignment bias for the parity regime.
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub usvt: bool,
    /// Entries sampled for error metrics when the tensor exceeds `dense_limit`.
    #[serde(default = "default_metric_samples")]
    pub metric_samples: usize,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.t < 3 {
            errs.push(format!("t = {} must be at least 3", self.t));
        }
        if self.n_list.is_empty() {
            errs.push("n_list must not be empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            errs.push("n_list must be strictly ascending".into());
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2 || n < self.r) {
            errs.push(format!("n = {n} must be at least 2 and at least r"));
        }
        if self.seeds.is_empty() {
            errs.push("seeds must not be empty".into());
        }
        if self.r == 0 {
            errs.push("r must be positive".into());
        }
        if !(self.kappa > 0.0 && self.kappa <= self.t as f64 - 1.0) {
            errs.push(format!("kappa = {} must lie in (0, t - 1]", self.kappa));
        }
        if !(0.0..1.0).contains(&self.noise_amplitude) {
            errs.push(format!("noise_amplitude = {} must lie in [0, 1)", self.noise_amplitude));
        }
        match self.eta_rule {
            EtaRuleName::Manual => match self.eta {
                Some(e) if e > 0.0 => {}
                _ => errs.push("eta_rule = \"manual\" requires a positive eta".into()),
            },
            _ => {
                if self.eta_multipliers.is_empty() || self.eta_multipliers.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
                    errs.push("eta_multipliers must be a nonempty list of positive numbers".into());
                }
            }
        }
        let [lo, hi] = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo != 0.0) {
            errs.push(format!("weight_range [{lo}, {hi}] is not a valid interval"));
        }
        if !(0.0..=0.5).contains(&self.bias) {
            errs.push(format!("bias = {} must lie in [0, 0.5]", self.bias));
        }
        if self.regime == Regime::XorHardness {
            if self.t != 3 {
                errs.push("xor_hardness requires t = 3".into());
            }
            if self.r != 1 {
                errs.push("xor_hardness requires r = 1".into());
            }
            if self.noise_amplitude != 0.0 {
                errs.push("xor_hardness has its own flip noise; noise_amplitude must be 0".into());
            }
        }
        if self.metric_samples == 0 {
            errs.push("metric_samples must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    pub fn factor_family(&self) -> FactorFamily {
        match self.family {
            Some(FamilyName::Constant) => FactorFamily::Constant,
            Some(FamilyName::Cosine) => FactorFamily::Cosine,
            Some(FamilyName::ShiftedCosine) => FactorFamily::ShiftedCosine,
            Some(FamilyName::Rademacher) => FactorFamily::Rademacher { bias: self.bias },
            None => match self.regime {
                Regime::OrthogonalZeroMeans => FactorFamily::Cosine,
                Regime::XorHardness => FactorFamily::Rademacher { bias: self.bias },
                _ => FactorFamily::ShiftedCosine,
            },
        }
    }

    pub fn weights(&self) -> WeightKind {
        let [low, high] = self.weight_range;
        let name = self.weight_kind.unwrap_or(match self.regime {
            Regime::OrthogonalZeroMeans => WeightName::RandomLatentCombination,
            _ => WeightName::Uniform,
        });
        match name {
            WeightName::Uniform => WeightKind::Uniform,
            WeightName::RandomLatentCombination => WeightKind::RandomLatentCombination { low, high },
        }
    }

    /// One rule per swept multiplier.
    pub fn eta_rules(&self) -> Vec<EtaRule> {
        match self.eta_rule {
            EtaRuleName::Manual => vec![EtaRule::Manual(self.eta.unwrap_or(f64::NAN))],
            EtaRuleName::Algorithm => self.eta_multipliers.iter().map(|&c| EtaRule::AlgorithmRule { c }).collect(),
            EtaRuleName::Analysis => self.eta_multipliers.iter().map(|&c| EtaRule::AnalysisRule { c }).collect(),
        }
    }

    pub fn fallback(&self) -> Fallback {
        match self.fallback {
            FallbackName::GlobalMean => Fallback::GlobalMean,
            FallbackName::Unestimated => Fallback::Unestimated,
        }
    }

    /// Sampling density `n^(-(t-1)+κ)`.
    pub fn density(&self, n: usize) -> f64 {
        (n as f64).powf(-(self.t as f64 - 1.0) + self.kappa).min(1.0)
    }
}
