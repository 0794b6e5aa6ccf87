use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::MfOptions;
use crate::mixture::MixtureHyper;

/// One experiment: a model, the sample sizes, replications and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gsm {
        alpha: f64,
        radius: f64,
        prior: GsmPriorSpec,
        signal: GsmSignalSpec,
        #[serde(default)]
        posterior: GsmPosteriorKind,
        #[serde(default)]
        metric: GsmMetric,
        /// Defaults to `⌈4 n_max^{1/(2α+1)}⌉`.
        #[serde(default)]
        k_max: Option<usize>,
    },
    TruncGauss {
        alpha: f64,
        beta: f64,
        radius: f64,
        /// The VB dimension is `k = ⌈n^t⌉`.
        t: f64,
        #[serde(default)]
        signal: TruncSignalSpec,
    },
    TruncCurve {
        alpha: f64,
        beta: f64,
        t_grid: Vec<f64>,
    },
    Piecewise {
        sigma: f64,
        bound: f64,
        k_star: usize,
        method: PiecewiseMethod,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        /// Piece levels; defaults to `−B, B, −B, …` snapped to the grid.
        #[serde(default)]
        levels: Option<Vec<f64>>,
    },
    Mixture {
        means: Vec<f64>,
        weights: Vec<f64>,
        sigma: f64,
        k_candidates: Vec<usize>,
        #[serde(default)]
        hyper: MixtureHyper,
    },
    Expfam {
        theta_star: Vec<f64>,
        k: usize,
        #[serde(default = "unit")]
        prior_variance: f64,
        #[serde(default)]
        options: MfOptions,
    },
    Divergence {
        pairs: usize,
        min_size: usize,
        max_size: usize,
    },
}

fn default_grid_points() -> usize {
    64
}

fn unit() -> f64 {
    1.0
}

/// Sieve prior with `π(k) ∝ e^{−τk}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GsmPriorSpec {
    Gaussian { variance: f64, tau: f64 },
    /// Cauchy coordinates rescaled by the noise level `n`.
    RescaledCauchy { scale: f64, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GsmSignalSpec {
    Zero,
    Spike { j0: usize },
    SobolevBoundary,
    /// Spike at `⌈2 (n / log n)^{1/(2α+1)}⌉`, recomputed for each `n`.
    LowerBoundSpike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GsmPosteriorKind {
    #[default]
    MeanField,
    EmpiricalBayes,
}

/// What a GSM replication reports: `E_Q‖θ − θ*‖²` or the selected dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GsmMetric {
    #[default]
    Risk,
    Dimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncSignalSpec {
    /// Largest risk over the adversarial signals.
    #[default]
    WorstCase,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PiecewiseMethod {
    MeanField,
    /// Markov prior with switch probability `n^{−c}`, solved exactly on the grid.
    Markov { c: f64 },
    /// Change-point prior `π(k) ∝ n^{−k}` fitted by block CAVI; cubic in `n`.
    GeometricCavi,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses a JSON document; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(config_err("replications must be positive"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("n_grid must be strictly increasing"));
        }
        if self.n_grid.first() == Some(&0) {
            return Err(config_err("n_grid entries must be positive"));
        }
        let needs_grid = !matches!(self.model, ModelSpec::Divergence { .. });
        if needs_grid && self.n_grid.is_empty() {
            return Err(config_err("n_grid must not be empty"));
        }
        match &self.model {
            ModelSpec::Gsm { alpha, radius, prior, signal, k_max, .. } => {
                positive("alpha", *alpha)?;
                positive("radius", *radius)?;
                match *prior {
                    GsmPriorSpec::Gaussian { variance, tau } => {
                        positive("prior variance", variance)?;
                        if !(tau >= 0.0 && tau.is_finite()) {
                            return Err(config_err("tau must be non-negative"));
                        }
                    }
                    GsmPriorSpec::RescaledCauchy { scale, tau } => {
                        positive("prior scale", scale)?;
                        if !(tau >= 0.0 && tau.is_finite()) {
                            return Err(config_err("tau must be non-negative"));
                        }
                    }
                }
                if *k_max == Some(0) {
                    return Err(config_err("k_max must be positive"));
                }
                if let GsmSignalSpec::Spike { j0 } = signal {
                    if *j0 == 0 {
                        return Err(config_err("spike index is 1-based"));
                    }
                }
                if matches!(signal, GsmSignalSpec::LowerBoundSpike) && self.n_grid[0] < 3 {
                    return Err(config_err("the lower-bound spike needs n >= 3"));
                }
            }
            ModelSpec::TruncGauss { alpha, beta, radius, t, .. } => {
                positive("alpha", *alpha)?;
                positive("beta", *beta)?;
                positive("radius", *radius)?;
                if !(*t > 0.0 && *t <= 1.0) {
                    return Err(config_err(format!("t must lie in (0, 1], got {t}")));
                }
            }
            ModelSpec::TruncCurve { alpha, beta, t_grid } => {
                positive("alpha", *alpha)?;
                positive("beta", *beta)?;
                if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
                    return Err(config_err("t_grid must be a non-empty subset of (0, 1]"));
                }
                if self.n_grid.len() < 3 || self.n_grid[0] < 64 {
                    return Err(config_err("the curve needs at least 3 sample sizes, each >= 64"));
                }
            }
            ModelSpec::Piecewise { sigma, bound, k_star, method, grid_points, levels } => {
                positive("sigma", *sigma)?;
                positive("bound", *bound)?;
                if *grid_points < 16 {
                    return Err(config_err(format!("grid_points must be at least 16, got {grid_points}")));
                }
                if *k_star == 0 {
                    return Err(config_err("k_star must be positive"));
                }
                if self.n_grid[0] < *k_star as u64 {
                    return Err(config_err("every n must be at least k_star"));
                }
                if let Some(l) = levels {
                    if l.len() != *k_star || l.iter().any(|v| !(v.abs() <= *bound)) {
                        return Err(config_err("levels must have k_star entries within the bound"));
                    }
                }
                if let PiecewiseMethod::Markov { c } = method {
                    positive("c", *c)?;
                }
            }
            ModelSpec::Mixture { means, weights, sigma, k_candidates, .. } => {
                positive("sigma", *sigma)?;
                if means.is_empty() || means.len() != weights.len() {
                    return Err(config_err("means and weights must be non-empty and of equal length"));
                }
                if k_candidates.is_empty() || k_candidates.contains(&0) {
                    return Err(config_err("k_candidates must be non-empty and positive"));
                }
            }
            ModelSpec::Expfam { theta_star, k, prior_variance, .. } => {
                positive("prior_variance", *prior_variance)?;
                if theta_star.iter().any(|t| !t.is_finite()) {
                    return Err(config_err("theta_star must be finite"));
                }
                if *k == 0 {
                    return Err(config_err("k must be positive"));
                }
            }
            ModelSpec::Divergence { pairs, min_size, max_size } => {
                if *pairs == 0 || *min_size < 2 || max_size < min_size {
                    return Err(config_err("need pairs > 0 and 2 <= min_size <= max_size"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let ok = r#"{"model": {"kind": "trunc_gauss", "alpha": 2, "beta": 1, "radius": 1, "t": 0.2},
                     "n_grid": [64, 128, 256], "replications": 1, "master_seed": 3}"#;
        let cfg = ExperimentConfig::from_json(ok).unwrap();
        assert_eq!(cfg.n_grid, vec![64, 128, 256]);
        let extra = ok.replace("\"master_seed\"", "\"bogus\": 1, \"master_seed\"");
        assert!(ExperimentConfig::from_json(&extra).unwrap_err().is_validation());
        let nested = ok.replace("\"t\": 0.2", "\"t\": 0.2, \"gamma\": 1");
        assert!(ExperimentConfig::from_json(&nested).is_err());
    }

    #[test]
    fn rejects_invalid_grids() {
        let base = r#"{"model": {"kind": "trunc_gauss", "alpha": 2, "beta": 1, "radius": 1, "t": 0.2}, "n_grid": NGRID}"#;
        for bad in ["[64, 64, 128]", "[128, 64]", "[]"] {
            assert!(ExperimentConfig::from_json(&base.replace("NGRID", bad)).is_err(), "{bad}");
        }
        let piecewise = r#"{"model": {"kind": "piecewise", "sigma": 1, "bound": 1, "k_star": 2,
                            "method": {"kind": "markov", "c": 1}, "grid_points": 8}, "n_grid": [16, 32, 64]}"#;
        assert!(ExperimentConfig::from_json(piecewise).is_err());
    }
}
