use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quadrature;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Density `f_j` of a single coordinate under the sieve prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordinateFamily {
    /// `N(0, variance)`.
    Gaussian { variance: f64 },
    /// `f(x) = √n g(√n x)` with `g` a Cauchy density of the given scale.
    RescaledCauchy { scale: f64, noise_level: f64 },
    /// `f(x) = √n g(√n x)` with `g = N(0, variance)`, i.e. `N(0, variance / n)`.
    RescaledGaussian { variance: f64, noise_level: f64 },
}

impl CoordinateFamily {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CoordinateFamily::Gaussian { variance } => variance > 0.0 && variance.is_finite(),
            CoordinateFamily::RescaledCauchy { scale, noise_level } => {
                scale > 0.0 && scale.is_finite() && noise_level > 0.0 && noise_level.is_finite()
            }
            CoordinateFamily::RescaledGaussian { variance, noise_level } => {
                variance > 0.0 && variance.is_finite() && noise_level > 0.0 && noise_level.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid coordinate family {self:?}")))
        }
    }

    /// Variance of the coordinate density when it is Gaussian (the conjugate case).
    pub fn conjugate_variance(&self) -> Option<f64> {
        match *self {
            CoordinateFamily::Gaussian { variance } => Some(variance),
            CoordinateFamily::RescaledGaussian { variance, noise_level } => Some(variance / noise_level),
            CoordinateFamily::RescaledCauchy { .. } => None,
        }
    }

    /// Standard deviation, or the Cauchy scale of `f_j` on the θ scale.
    pub fn width(&self) -> f64 {
        match *self {
            CoordinateFamily::RescaledCauchy { scale, noise_level } => scale / noise_level.sqrt(),
            _ => self.conjugate_variance().map(f64::sqrt).unwrap_or(f64::NAN),
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            CoordinateFamily::RescaledCauchy { .. } => {
                let s = self.width();
                let z = x / s;
                -(std::f64::consts::PI * s).ln() - z.mul_add(z, 1.0).ln()
            }
            _ => {
                let v = self.conjugate_variance().unwrap();
                -0.5 * (LN_2PI + v.ln()) - x * x / (2.0 * v)
            }
        }
    }

    /// Supremum of the density.
    pub fn sup_density(&self) -> f64 {
        self.log_pdf(0.0).exp()
    }
}

/// Mixture-of-products prior over `(k, θ)`: `k ~ π` on `0..=K_max`, then
/// `θ_j ~ f_j` for `j ≤ k` and `θ_j = 0` beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SievePrior {
    dimension_weights: Vec<f64>,
    families: Vec<CoordinateFamily>,
}

impl SievePrior {
    /// `dimension_weights[k]` is `π(k)` for `k = 0..=K_max`; `families[j-1]` is `f_j`.
    pub fn new(dimension_weights: Vec<f64>, families: Vec<CoordinateFamily>) -> Result<Self> {
        if dimension_weights.len() < 2 {
            return Err(Error::input("need weights for k = 0..=K_max with K_max >= 1"));
        }
        let k_max = dimension_weights.len() - 1;
        if families.len() != k_max {
            return Err(Error::input(format!(
                "{} coordinate families for K_max = {k_max}",
                families.len()
            )));
        }
        for f in &families {
            f.validate()?;
        }
        if dimension_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::input("dimension weights must be finite and non-negative"));
        }
        let total: f64 = dimension_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("dimension weights sum to {total}")));
        }
        let dimension_weights = dimension_weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dimension_weights, families })
    }

    /// `π(k) ∝ exp(−τ k)` on `0..=K_max` with the same family for every coordinate.
    pub fn geometric(k_max: usize, tau: f64, family: CoordinateFamily) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::input("K_max must be positive"));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
        }
        let raw: Vec<f64> = (0..=k_max).map(|k| (-tau * k as f64).exp()).collect();
        let z: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|w| w / z).collect(), vec![family; k_max])
    }

    pub fn k_max(&self) -> usize {
        self.families.len()
    }

    pub fn dimension_weights(&self) -> &[f64] {
        &self.dimension_weights
    }

    /// Density of coordinate `j` (1-based).
    pub fn family(&self, j: usize) -> Result<&CoordinateFamily> {
        if j == 0 || j > self.k_max() {
            return Err(Error::input(format!("coordinate {j} outside 1..={}", self.k_max())));
        }
        Ok(&self.families[j - 1])
    }

    /// True when every `f_j` is bounded by `a` and `π` is non-increasing,
    /// the assumptions under which the effective dimension is controlled.
    pub fn is_bounded_nonincreasing(&self, a: f64) -> bool {
        let bounded = self.families.iter().all(|f| f.sup_density() <= a);
        let monotone = self.dimension_weights.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        bounded && monotone
    }

    /// Checks `∫ f_j = 1` for every coordinate by quadrature; returns the worst deviation.
    pub fn check_normalization(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for f in &self.families {
            let s = f.width();
            // x = s·tan(πu/2) maps (−1, 1) onto the real line.
            let integral = quadrature::integrate(
                |u| {
                    let t = std::f64::consts::FRAC_PI_2 * u;
                    let x = s * t.tan();
                    let jac = s * std::f64::consts::FRAC_PI_2 / t.cos().powi(2);
                    let v = (f.log_pdf(x)).exp() * jac;
                    if v.is_finite() {
                        v
                    } else {
                        0.0
                    }
                },
                -1.0 + 1e-12,
                1.0 - 1e-12,
                1e-10,
            )?;
            worst = worst.max((integral - 1.0).abs());
        }
        if worst > 1e-6 {
            return Err(Error::numeric(format!("coordinate density integrates to 1 ± {worst}")));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_weights_normalized_and_decreasing() {
        let p = SievePrior::geometric(50, 1.0, CoordinateFamily::Gaussian { variance: 1.0 }).unwrap();
        let s: f64 = p.dimension_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.is_bounded_nonincreasing(0.4));
        assert!(!p.is_bounded_nonincreasing(0.3));
    }

    #[test]
    fn densities_integrate_to_one() {
        for fam in [
            CoordinateFamily::Gaussian { variance: 2.0 },
            CoordinateFamily::RescaledCauchy { scale: 1.0, noise_level: 400.0 },
            CoordinateFamily::RescaledGaussian { variance: 1.0, noise_level: 50.0 },
        ] {
            let p = SievePrior::geometric(3, 1.0, fam).unwrap();
            assert!(p.check_normalization().unwrap() < 1e-6);
        }
    }

    #[test]
    fn rescaled_gaussian_is_narrower_gaussian() {
        let f = CoordinateFamily::RescaledGaussian { variance: 2.0, noise_level: 8.0 };
        let g = CoordinateFamily::Gaussian { variance: 0.25 };
        assert!((f.log_pdf(0.3) - g.log_pdf(0.3)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SievePrior::new(vec![0.5, 0.6], vec![CoordinateFamily::Gaussian { variance: 1.0 }]).is_err());
        assert!(SievePrior::new(vec![0.5, 0.5], vec![]).is_err());
        assert!(SievePrior::geometric(2, 1.0, CoordinateFamily::Gaussian { variance: -1.0 }).is_err());
        let p = SievePrior::geometric(2, 1.0, CoordinateFamily::Gaussian { variance: 1.0 }).unwrap();
        assert!(p.family(0).is_err());
        assert!(p.family(3).is_err());
    }
}
