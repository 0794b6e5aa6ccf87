use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Density of a piece value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SiteDensity {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl SiteDensity {
    /// Uniform on `[−B−1, B+1]`.
    pub fn uniform_for_bound(bound: f64) -> Self {
        SiteDensity::Uniform { lo: -bound - 1.0, hi: bound + 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SiteDensity::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            SiteDensity::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid site density {self:?}")))
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            SiteDensity::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SiteDensity::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * (LN_2PI + z * z) - sd.ln()
            }
        }
    }

    /// Infimum of the density over `[−B−1, B+1]`.
    pub fn min_on(&self, bound: f64) -> f64 {
        let (a, b) = (-bound - 1.0, bound + 1.0);
        self.log_pdf(a).exp().min(self.log_pdf(b).exp()).min(self.log_pdf(0.5 * (a + b)).exp())
    }

    /// Normalized weights `g(grid_b) / Σ g(grid)`, the discretized density.
    pub fn grid_weights(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let raw: Vec<f64> = grid.iter().map(|&x| self.log_pdf(x).exp()).collect();
        let z: f64 = raw.iter().sum();
        if !(z > 0.0) {
            return Err(Error::input("site density puts no mass on the grid"));
        }
        Ok(raw.into_iter().map(|w| w / z).collect())
    }
}

/// Prior over piecewise-constant sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChangePointPrior {
    /// `k ~ π` pieces, `k − 1` change points uniform among the `n − 1` gaps,
    /// piece values drawn from `g` (each new value differs from the previous one).
    PieceCountPrior { piece_weights: Vec<f64>, g: SiteDensity },
    /// Each site keeps the previous value with probability `1 − p`, otherwise redraws from `g`.
    MarkovPrior { p: f64, g: SiteDensity },
}

impl ChangePointPrior {
    /// `piece_weights[k-1] = π(k)` for `k = 1..=n`.
    pub fn with_piece_weights(piece_weights: Vec<f64>, g: SiteDensity) -> Result<Self> {
        g.validate()?;
        if piece_weights.is_empty() || piece_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("piece weights must be non-empty, finite and non-negative"));
        }
        let total: f64 = piece_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("piece weights sum to {total}")));
        }
        let piece_weights = piece_weights.into_iter().map(|w| w / total).collect();
        Ok(ChangePointPrior::PieceCountPrior { piece_weights, g })
    }

    /// `π(k) ∝ n^{−k}` on `1..=n`.
    pub fn geometric_pieces(n: usize, g: SiteDensity) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("n must be positive"));
        }
        let ln_n = (n as f64).ln();
        let logs: Vec<f64> = (1..=n).map(|k| -(k as f64) * ln_n).collect();
        let z = crate::numeric::log_sum_exp(&logs);
        Self::with_piece_weights(logs.into_iter().map(|l| (l - z).exp()).collect(), g)
    }

    pub fn markov_with_p(p: f64, g: SiteDensity) -> Result<Self> {
        g.validate()?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("change probability must lie in (0, 1), got {p}")));
        }
        Ok(ChangePointPrior::MarkovPrior { p, g })
    }

    /// Change probability `p = n^{−c}`.
    pub fn markov(n: usize, c: f64, g: SiteDensity) -> Result<Self> {
        if n < 2 {
            return Err(Error::input("need n >= 2 for p = n^-c to lie in (0, 1)"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("exponent c must be positive, got {c}")));
        }
        Self::markov_with_p((n as f64).powf(-c), g)
    }

    pub fn site_density(&self) -> &SiteDensity {
        match self {
            ChangePointPrior::PieceCountPrior { g, .. } | ChangePointPrior::MarkovPrior { g, .. } => g,
        }
    }

    /// `ψ(K) = log π(K+1) − log C(n−1, K)` for `K = 0..n`: the log prior weight
    /// of one particular change pattern with `K` changes.
    pub(crate) fn pattern_log_weights(piece_weights: &[f64]) -> Vec<f64> {
        let n = piece_weights.len();
        (0..n)
            .map(|k| piece_weights[k].ln() - ln_binomial((n - 1) as u64, k as u64))
            .collect()
    }
}
