use serde::Serialize;
use statrs::function::erf::erfc;

use super::prior::{ChangePointPrior, SiteDensity};
use super::signal::PiecewiseSignal;
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn std_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * x * x).exp()
    }
}

fn std_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Mills ratio `(1 − Φ(t)) / φ(t)` for `t ≥ 5`, by backward evaluation of its continued fraction.
fn mills_ratio(t: f64) -> f64 {
    let mut acc = t;
    for k in (1..=200).rev() {
        acc = t + k as f64 / acc;
    }
    1.0 / acc
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log mass, mean and variance of a standard normal truncated to `[a, b]`.
fn standard_truncated_moments(a: f64, b: f64) -> Result<(f64, f64, f64)> {
    if a > 0.0 {
        // Work in the left tail, where the CDF is computed without cancellation.
        let (ln_z, m, v) = standard_truncated_moments(-b, -a)?;
        return Ok((ln_z, -m, v));
    }
    if b < -5.0 {
        // Both ends deep in the left tail: divide through by φ(b) so nothing underflows.
        let (r, ra, ar) = if a.is_infinite() {
            (0.0, 0.0, 0.0)
        } else {
            let r = (0.5 * (b - a) * (b + a)).exp();
            (r, mills_ratio(-a), a * r)
        };
        let d = mills_ratio(-b) - r * ra;
        if !(d > 0.0) {
            return Err(Error::numeric(format!("truncation window [{a}, {b}] has no Gaussian mass")));
        }
        let mean = (r - 1.0) / d;
        let var = 1.0 + (ar - b) / d - mean * mean;
        return Ok((-0.5 * b * b - LN_SQRT_2PI + d.ln(), mean, var.max(0.0)));
    }
    let z = std_cdf(b) - std_cdf(a);
    if !(z > 0.0) {
        return Err(Error::numeric(format!("truncation window [{a}, {b}] has no Gaussian mass")));
    }
    let (pa, pb) = (std_pdf(a), std_pdf(b));
    let apa = if a.is_infinite() { 0.0 } else { a * pa };
    let bpb = if b.is_infinite() { 0.0 } else { b * pb };
    let mean = (pa - pb) / z;
    let var = 1.0 + (apa - bpb) / z - mean * mean;
    Ok((z.ln(), mean, var.max(0.0)))
}

/// `N(center, scale²)` restricted to `[lo, hi]` (either end may be infinite).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedGaussian {
    pub center: f64,
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
    mean: f64,
    variance: f64,
    log_mass: f64,
}

impl TruncatedGaussian {
    pub fn new(center: f64, scale: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !center.is_finite() || !(lo < hi) {
            return Err(Error::domain(format!(
                "invalid truncated Gaussian: center {center}, scale {scale}, window [{lo}, {hi}]"
            )));
        }
        let (log_mass, m, v) = standard_truncated_moments((lo - center) / scale, (hi - center) / scale)?;
        Ok(Self { center, scale, lo, hi, mean: center + scale * m, variance: scale * scale * v, log_mass })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn second_moment_about(&self, c: f64) -> f64 {
        self.variance + (self.mean - c).powi(2)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.center) / self.scale;
        -0.5 * z * z - LN_SQRT_2PI - self.scale.ln() - self.log_mass
    }
}

/// Product posterior `∏ q_i` with `q_i ∝ g(θ) exp(−(θ − X_i)²/2σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinatewisePosterior {
    pub sites: Vec<TruncatedGaussian>,
}

pub fn fit_mean_field(x: &[f64], sigma: f64, prior: &ChangePointPrior) -> Result<CoordinatewisePosterior> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("observations must be non-empty and finite"));
    }
    let sites = x
        .iter()
        .map(|&xi| match *prior.site_density() {
            SiteDensity::Uniform { lo, hi } => TruncatedGaussian::new(xi, sigma, lo, hi),
            SiteDensity::Gaussian { mean, sd } => {
                let prec = sigma.powi(-2) + sd.powi(-2);
                let center = (xi / (sigma * sigma) + mean / (sd * sd)) / prec;
                TruncatedGaussian::new(center, prec.sqrt().recip(), f64::NEG_INFINITY, f64::INFINITY)
            }
        })
        .collect::<Result<_>>()?;
    Ok(CoordinatewisePosterior { sites })
}

impl CoordinatewisePosterior {
    /// `E_Q ‖θ − θ*‖²` from closed-form site moments.
    pub fn risk(&self, signal: &PiecewiseSignal) -> Result<f64> {
        if signal.len() != self.sites.len() {
            return Err(Error::input(format!(
                "posterior has {} sites, signal has {}",
                self.sites.len(),
                signal.len()
            )));
        }
        Ok(self.sites.iter().zip(signal.values()).map(|(q, &t)| q.second_moment_about(t)).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_moments(q: &TruncatedGaussian, points: usize) -> (f64, f64) {
        let (lo, hi) = (q.lo.max(q.center - 40.0 * q.scale), q.hi.min(q.center + 40.0 * q.scale));
        let h = (hi - lo) / points as f64;
        let xs: Vec<f64> = (0..points).map(|i| lo + (i as f64 + 0.5) * h).collect();
        let w: Vec<f64> = xs.iter().map(|&x| (-(x - q.center).powi(2) / (2.0 * q.scale * q.scale)).exp()).collect();
        let z: f64 = w.iter().sum();
        let m = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / z;
        let v = xs.iter().zip(&w).map(|(x, w)| (x - m).powi(2) * w).sum::<f64>() / z;
        (m, v)
    }

    #[test]
    fn far_tail_windows_stay_finite() {
        let q = TruncatedGaussian::new(-12.336, 0.01, 0.0, 0.1).unwrap();
        assert!(q.mean() >= 0.0 && q.mean() < 1e-4, "{}", q.mean());
        assert!(q.variance() > 0.0 && q.variance() < 1e-8);
        assert!(q.log_pdf(0.0).is_finite());
        let r = TruncatedGaussian::new(12.336, 0.01, -0.1, 0.0).unwrap();
        assert!((r.mean() + q.mean()).abs() < 1e-15);
        // Window ends just inside the tail branch should agree with the CDF difference.
        let (lnz, m, v) = standard_truncated_moments(-7.0, -5.5).unwrap();
        let z = std_cdf(-5.5) - std_cdf(-7.0);
        assert!((lnz - z.ln()).abs() < 1e-9);
        let (m2, v2) = grid_moments(&TruncatedGaussian::new(0.0, 1.0, -7.0, -5.5).unwrap(), 100_000);
        assert!((m - m2).abs() < 1e-6 && (v - v2).abs() < 1e-6);
    }

    #[test]
    fn symmetric_window_has_zero_mean() {
        let prior = ChangePointPrior::markov_with_p(0.1, SiteDensity::uniform_for_bound(1.0)).unwrap();
        let q = fit_mean_field(&[0.0], 1.0, &prior).unwrap();
        assert!(q.sites[0].mean().abs() < 1e-15);
        assert!(q.sites[0].variance() < 1.0);
    }

    #[test]
    fn moments_match_grid() {
        for (c, s, lo, hi) in [(0.0, 1.0, -2.0, 2.0), (1.7, 0.5, -2.0, 2.0), (-5.0, 1.0, -2.0, 2.0), (9.0, 1.3, -2.0, 2.0)] {
            let q = TruncatedGaussian::new(c, s, lo, hi).unwrap();
            let (m, v) = grid_moments(&q, 100_000);
            assert!((q.mean() - m).abs() < 1e-6, "mean {c}: {} vs {m}", q.mean());
            assert!((q.variance() - v).abs() < 1e-6, "var {c}: {} vs {v}", q.variance());
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let q = TruncatedGaussian::new(0.8, 0.7, -2.0, 2.0).unwrap();
        let total = crate::numeric::quadrature::integrate(|x| q.log_pdf(x).exp(), -2.0, 2.0, 1e-12).unwrap();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_site_density_gives_gaussian_posterior() {
        let prior = ChangePointPrior::markov_with_p(0.1, SiteDensity::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        let q = fit_mean_field(&[2.0], 1.0, &prior).unwrap();
        assert!((q.sites[0].mean() - 1.0).abs() < 1e-14);
        assert!((q.sites[0].variance() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn risk_is_additive() {
        let prior = ChangePointPrior::markov_with_p(0.1, SiteDensity::uniform_for_bound(1.0)).unwrap();
        let x = [0.3, -0.4, 1.1];
        let sig = PiecewiseSignal::new(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let q = fit_mean_field(&x, 1.0, &prior).unwrap();
        let total = q.risk(&sig).unwrap();
        let parts: f64 = (0..3)
            .map(|i| {
                let qi = fit_mean_field(&x[i..=i], 1.0, &prior).unwrap();
                qi.risk(&PiecewiseSignal::new(vec![sig.values()[i]], 1.0).unwrap()).unwrap()
            })
            .sum();
        assert!((total - parts).abs() < 1e-14);
        let short = PiecewiseSignal::new(vec![0.0], 1.0).unwrap();
        assert!(q.risk(&short).is_err());
    }
}
