use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use optree::{AlphaRule, PartitionScheme, PriorSpec, RecursionLimits};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Any coordinate may be halved.
    Full,
    /// Coordinates are halved in turn.
    Cycling,
    /// Binary contingency table on {1,2}^p.
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKind {
    /// Beta(1/2, 1/2) at every split.
    Half,
    /// Pseudo-counts tau^level times the relative child measure.
    Tau,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Mean,
    Hmap,
    Hutter,
    StandardPt,
}

/// Model and run settings shared by `estimate` and `sample-prior`. Every
/// field is optional here; unset flags fall back to the config file, then to
/// the defaults.
#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Partition scheme.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// Dimension p (inferred from the input when omitted).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Prior stopping probability.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Pseudo-count rule.
    #[arg(long, value_enum)]
    pub alpha: Option<AlphaKind>,
    /// Growth factor for `--alpha tau`.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    /// Regions of smaller measure are not refined.
    #[arg(long)]
    pub precision_threshold: Option<f64>,
    /// Regions at this level are not refined.
    #[arg(long)]
    pub max_level: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid cells per axis for the density grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Map each coordinate affinely onto [0, 1] using the data range.
    #[arg(long)]
    #[serde(default)]
    pub rescale: bool,
    /// Input CSV (headerless, one observation per row).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory or file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with unset fields taken from `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            scheme: self.scheme.or(base.scheme),
            dim: self.dim.or(base.dim),
            rho: self.rho.or(base.rho),
            alpha: self.alpha.or(base.alpha),
            tau: self.tau.or(base.tau),
            estimator: self.estimator.or(base.estimator),
            precision_threshold: self.precision_threshold.or(base.precision_threshold),
            max_level: self.max_level.or(base.max_level),
            seed: self.seed.or(base.seed),
            grid: self.grid.or(base.grid),
            rescale: self.rescale || base.rescale,
            input: self.input.or(base.input),
            output: self.output.or(base.output),
        }
    }
}

/// Fully resolved and validated settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub dim: usize,
    pub rho: f64,
    pub alpha: AlphaKind,
    pub tau: Option<f64>,
    pub estimator: EstimatorKind,
    pub precision_threshold: f64,
    pub max_level: u32,
    pub seed: u64,
    pub grid: usize,
    pub rescale: bool,
}

pub fn default_grid(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 256,
        _ => 16,
    }
}

impl RunConfig {
    /// Resolves `s`, using `inferred_dim` when no dimension is given, and
    /// checks every field. `degenerate_rho` admits rho in {0, 1}.
    pub fn resolve(s: &Settings, inferred_dim: Option<usize>, degenerate_rho: bool) -> CliResult<Self> {
        let dim = s.dim.or(inferred_dim).unwrap_or(1);
        if dim == 0 {
            return Err(CliError::Config("dimension must be at least 1".into()));
        }
        let alpha = s.alpha.unwrap_or(AlphaKind::Half);
        let tau = match alpha {
            AlphaKind::Half => None,
            AlphaKind::Tau => Some(s.tau.unwrap_or(2.0)),
        };
        let defaults = RecursionLimits::for_dim(dim);
        let cfg = RunConfig {
            scheme: s.scheme.unwrap_or(SchemeKind::Full),
            dim,
            rho: s.rho.unwrap_or(0.5),
            alpha,
            tau,
            estimator: s.estimator.unwrap_or(EstimatorKind::Hmap),
            precision_threshold: s.precision_threshold.unwrap_or(defaults.precision_threshold),
            max_level: s.max_level.unwrap_or(defaults.max_level),
            seed: s.seed.unwrap_or(0),
            grid: s.grid.unwrap_or_else(|| default_grid(dim)),
            rescale: s.rescale,
        };
        if cfg.grid == 0 {
            return Err(CliError::Config("grid must have at least one cell per axis".into()));
        }
        if cfg.rescale && cfg.scheme == SchemeKind::Table {
            return Err(CliError::Config("rescaling does not apply to table data".into()));
        }
        if degenerate_rho {
            PriorSpec::for_sampling(cfg.partition(), cfg.rho, cfg.alpha_rule())?;
        } else {
            cfg.prior()?;
        }
        cfg.limits()?;
        Ok(cfg)
    }

    pub fn partition(&self) -> PartitionScheme {
        match self.scheme {
            SchemeKind::Full => PartitionScheme::FullDyadic(self.dim),
            SchemeKind::Cycling => PartitionScheme::Cycling(self.dim),
            SchemeKind::Table => PartitionScheme::BinaryTable(self.dim),
        }
    }

    pub fn alpha_rule(&self) -> AlphaRule {
        match self.tau {
            None => AlphaRule::ConstantHalf,
            Some(tau) => AlphaRule::TauScaled { tau },
        }
    }

    pub fn prior(&self) -> CliResult<PriorSpec> {
        Ok(PriorSpec::new(self.partition(), self.rho, self.alpha_rule())?)
    }

    pub fn limits(&self) -> CliResult<RecursionLimits> {
        Ok(RecursionLimits::new(self.precision_threshold, self.max_level)?)
    }
}
