//! Run configuration shared by the CLI and the runners.

use std::fmt;
use std::str::FromStr;

use fann_core::filter::FilterNnisConfig;
use fann_core::lsh::{LshConfig, LshFamily};
use fann_core::nnis::NnisConfig;
use fann_core::sketch::SketchConstants;
use fann_core::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Min-rank sampling, rebuilt for every trial.
    Nns,
    NnsRankSwap,
    Nnis,
    /// Plain filter query, rebuilt for every trial. Not a fair sampler.
    Filter,
    FilterNnis,
    Oracle,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [
        SamplerKind::Nns,
        SamplerKind::NnsRankSwap,
        SamplerKind::Nnis,
        SamplerKind::Filter,
        SamplerKind::FilterNnis,
        SamplerKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Nns => "nns",
            SamplerKind::NnsRankSwap => "nns_rank_swap",
            SamplerKind::Nnis => "nnis",
            SamplerKind::Filter => "filter",
            SamplerKind::FilterNnis => "filter_nnis",
            SamplerKind::Oracle => "oracle",
        }
    }

    /// Whether fairness trials rebuild the structure instead of repeating a query.
    pub fn rebuilds_per_trial(self) -> bool {
        matches!(self, SamplerKind::Nns | SamplerKind::Filter)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.replace('-', "_");
        SamplerKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| ConfigError::UnknownSampler(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown sampler `{0}`")]
    UnknownSampler(String),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("constant {name} must be positive, got {value}")]
    NotPositive { name: String, value: f64 },
    #[error("expected NAME=VALUE, got `{0}`")]
    BadAssignment(String),
    #[error("{0}")]
    Invalid(String),
}

/// Tunable constants. Names accepted by [`Constants::set`] are listed in [`Constants::NAMES`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub c_l: f64,
    pub c_lambda: f64,
    pub c_sigma: f64,
    pub c_delta: f64,
    pub c_t: f64,
    pub c_f: f64,
    /// `ε` of the filter query threshold.
    pub eps_filter: f64,
    /// Copies of the plain filter index.
    pub filter_copies: f64,
}

impl Default for Constants {
    fn default() -> Self {
        let nnis = NnisConfig::default();
        let f = FilterNnisConfig::default();
        Constants {
            c_l: nnis.lsh.c_l,
            c_lambda: nnis.c_lambda,
            c_sigma: nnis.c_sigma,
            c_delta: nnis.sketch.c_delta,
            c_t: nnis.sketch.c_t,
            c_f: f.c_f,
            eps_filter: f.eps,
            filter_copies: 1.0,
        }
    }
}

impl Constants {
    pub const NAMES: [&'static str; 8] = ["C_L", "C_lambda", "C_Sigma", "C_Delta", "C_t", "C_f", "eps_filter", "R"];

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ConfigError::NotPositive { name: name.into(), value });
        }
        let slot = match name.to_ascii_lowercase().as_str() {
            "c_l" => &mut self.c_l,
            "c_lambda" => &mut self.c_lambda,
            "c_sigma" => &mut self.c_sigma,
            "c_delta" => &mut self.c_delta,
            "c_t" => &mut self.c_t,
            "c_f" => &mut self.c_f,
            "eps_filter" | "eps" => &mut self.eps_filter,
            "r" | "filter_copies" => &mut self.filter_copies,
            _ => return Err(ConfigError::UnknownConstant(name.into())),
        };
        *slot = value;
        Ok(())
    }

    /// Parses `NAME=VALUE`.
    pub fn assign(&mut self, s: &str) -> Result<(), ConfigError> {
        let (name, value) = s.split_once('=').ok_or_else(|| ConfigError::BadAssignment(s.into()))?;
        let value: f64 = value.trim().parse().map_err(|_| ConfigError::BadAssignment(s.into()))?;
        self.set(name.trim(), value)
    }

    pub fn lsh(&self) -> LshConfig {
        LshConfig { c_l: self.c_l }
    }

    pub fn nnis(&self) -> NnisConfig {
        NnisConfig {
            lsh: self.lsh(),
            c_lambda: self.c_lambda,
            c_sigma: self.c_sigma,
            sketch: SketchConstants { c_delta: self.c_delta, c_t: self.c_t },
        }
    }

    pub fn filter_nnis(&self) -> FilterNnisConfig {
        FilterNnisConfig { c_f: self.c_f, eps: self.eps_filter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub sampler: SamplerKind,
    pub metric: Metric,
    /// Hash family; the metric's default when `None`.
    pub family: Option<LshFamily>,
    pub constants: Constants,
    pub seed: u64,
    pub trials: usize,
}

impl Config {
    pub fn new(sampler: SamplerKind, metric: Metric) -> Self {
        Config { sampler, metric, family: None, constants: Constants::default(), seed: 0, trials: 1000 }
    }

    pub fn family(&self) -> LshFamily {
        self.family.unwrap_or_else(|| LshFamily::default_for(&self.metric))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.constants;
        for (name, v) in Constants::NAMES.iter().zip([
            c.c_l,
            c.c_lambda,
            c.c_sigma,
            c.c_delta,
            c.c_t,
            c.c_f,
            c.eps_filter,
            c.filter_copies,
        ]) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::NotPositive { name: (*name).into(), value: v });
            }
        }
        if c.c_l < 1.0 {
            return Err(ConfigError::Invalid("C_L must be at least 1".into()));
        }
        if c.eps_filter > 1.0 {
            return Err(ConfigError::Invalid("eps_filter must lie in (0, 1]".into()));
        }
        let filter = matches!(self.sampler, SamplerKind::Filter | SamplerKind::FilterNnis);
        if filter && !matches!(self.metric, Metric::InnerProduct { .. }) {
            return Err(ConfigError::Invalid(format!("{} needs the inner-product metric", self.sampler)));
        }
        if let Some(f) = &self.family {
            if !filter && self.sampler != SamplerKind::Oracle {
                f.check_metric(&self.metric).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }
}
