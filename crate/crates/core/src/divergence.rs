//! Rényi-family divergences on finite supports and between Gaussians.
//!
//! Every divergence is returned as an extended real: `f64::INFINITY` stands for
//! a failure of absolute continuity, never an error. Terms where both
//! distributions vanish contribute zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-12;
const RENORMALIZE_TOL: f64 = 1e-9;

/// A probability vector on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteDistribution {
    probabilities: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates `probabilities`, renormalizing when the total is within 1e-9 of one.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::input("empty probability vector"));
        }
        for (i, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::input(format!("probability {i} is {p}")));
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        let probabilities = if (total - 1.0).abs() > NORMALIZATION_TOL {
            probabilities.into_iter().map(|p| p / total).collect()
        } else {
            probabilities
        };
        Ok(Self { probabilities })
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::input(format!("weights sum to {total}")));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

impl TryFrom<Vec<f64>> for DiscreteDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiscreteDistribution> for Vec<f64> {
    fn from(d: DiscreteDistribution) -> Self {
        d.probabilities
    }
}

/// A univariate normal law; variance zero is a point mass at `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarGaussian {
    pub mean: f64,
    pub variance: f64,
}

impl ScalarGaussian {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::domain(format!("invalid Gaussian N({mean}, {variance})")));
        }
        Ok(Self { mean, variance })
    }

    pub fn is_point_mass(&self) -> bool {
        self.variance == 0.0
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (2.0 * std::f64::consts::PI * self.variance).ln() - d * d / (2.0 * self.variance)
    }

    /// E (X - c)^2.
    pub fn second_moment_about(&self, c: f64) -> f64 {
        self.variance + (self.mean - c).powi(2)
    }
}

/// The six quantities of the divergence chain for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub tv: f64,
    pub hellinger_sq: f64,
    pub d_half: f64,
    pub kl: f64,
    pub d2: f64,
    pub chi2: f64,
}

impl DivergenceReport {
    /// The chain `tv² ≤ 2H² ≤ D½ ≤ KL ≤ D₂ ≤ χ²` as consecutive pairs, with `+∞` maximal.
    pub fn chain(&self) -> [(&'static str, f64); 6] {
        [
            ("tv^2", self.tv * self.tv),
            ("2H^2", 2.0 * self.hellinger_sq),
            ("D_1/2", self.d_half),
            ("KL", self.kl),
            ("D_2", self.d2),
            ("chi^2", self.chi2),
        ]
    }

    /// Largest amount by which a link of the chain is violated (0 if none).
    pub fn max_violation(&self) -> f64 {
        let c = self.chain();
        c.windows(2)
            .map(|w| {
                let (lo, hi) = (w[0].1, w[1].1);
                if hi == f64::INFINITY || lo <= hi {
                    0.0
                } else {
                    lo - hi
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn is_ordered(&self, slack: f64) -> bool {
        self.max_violation() <= slack
    }
}

fn check_lengths(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::input(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho <= 0.0 || rho == 1.0 {
        return Err(Error::domain(format!(
            "Rényi order must be positive and different from 1, got {rho}"
        )));
    }
    Ok(())
}

/// `D_ρ(p‖q) = (ρ−1)⁻¹ log Σ p_i^ρ q_i^{1−ρ}`.
pub fn renyi_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution, rho: f64) -> Result<f64> {
    check_lengths(p, q)?;
    check_rho(rho)?;
    let (p, q) = (p.probabilities(), q.probabilities());
    if rho > 1.0 && p.iter().zip(q).any(|(&pi, &qi)| pi > 0.0 && qi == 0.0) {
        return Ok(f64::INFINITY);
    }
    // Accumulate Σ p_i ((p_i/q_i)^{ρ−1} − 1) = S − 1 to keep precision near zero divergence.
    // Terms with q_i = 0 (ρ < 1) contribute −p_i; terms with p_i = 0 contribute 0 to S.
    let mut s_minus_one = 0.0;
    let mut common_mass = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            // contributes 0 to S; q_i mass sits outside the p-support
            continue;
        }
        if qi == 0.0 {
            s_minus_one -= pi;
            continue;
        }
        common_mass += pi;
        let log_ratio = pi.ln() - qi.ln();
        s_minus_one += pi * ((rho - 1.0) * log_ratio).exp_m1();
    }
    if common_mass == 0.0 {
        // disjoint supports, ρ < 1
        return Ok(f64::INFINITY);
    }
    let d = s_minus_one.ln_1p() / (rho - 1.0);
    if d.is_nan() {
        return Err(Error::numeric("Rényi sum evaluated to NaN"));
    }
    Ok(d.max(0.0))
}

/// Kullback–Leibler divergence with `0·log(0/·) = 0`.
pub fn kl_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    let mut kl = 0.0;
    for (&pi, &qi) in p.probabilities().iter().zip(q.probabilities()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pi * (pi.ln() - qi.ln());
    }
    Ok(kl.max(0.0))
}

/// Hellinger distance `sqrt(½ Σ (√p_i − √q_i)²)`.
pub fn hellinger_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    Ok(hellinger_sq_discrete(p, q)?.sqrt())
}

fn hellinger_sq_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    let s: f64 = p
        .probabilities()
        .iter()
        .zip(q.probabilities())
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// Total variation `½ Σ |p_i − q_i|`.
pub fn tv_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    let s: f64 = p.probabilities().iter().zip(q.probabilities()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// χ² divergence `Σ p_i²/q_i − 1`.
pub fn chi2_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_lengths(p, q)?;
    // Σ (p_i − q_i)²/q_i, equal to Σ p_i²/q_i − 1 but without cancellation.
    let mut s = 0.0;
    for (&pi, &qi) in p.probabilities().iter().zip(q.probabilities()) {
        if qi == 0.0 {
            if pi > 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        s += (pi - qi).powi(2) / qi;
    }
    Ok(s)
}

/// Closed-form Rényi divergence between two univariate Gaussians.
///
/// Equal variances reduce to `ρ(μ_a−μ_b)²/(2σ²)`. Otherwise, with the mixed
/// variance `v = ρ·σ_b² + (1−ρ)·σ_a²`:
/// `D_ρ = log(σ_b/σ_a) + log(σ_b²/v)/(2(ρ−1)) + ρ(μ_a−μ_b)²/(2v)`,
/// and `+∞` when `v ≤ 0`.
pub fn renyi_gaussian(a: &ScalarGaussian, b: &ScalarGaussian, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if a.is_point_mass() || b.is_point_mass() {
        return Ok(if a == b { 0.0 } else { f64::INFINITY });
    }
    let dm2 = (a.mean - b.mean).powi(2);
    if a.variance == b.variance {
        return Ok(rho * dm2 / (2.0 * a.variance));
    }
    let mixed = rho * b.variance + (1.0 - rho) * a.variance;
    if mixed <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let d = 0.5 * (b.variance / a.variance).ln()
        + (b.variance / mixed).ln() / (2.0 * (rho - 1.0))
        + rho * dm2 / (2.0 * mixed);
    Ok(d.max(0.0))
}

/// KL divergence between two univariate Gaussians.
pub fn kl_gaussian(a: &ScalarGaussian, b: &ScalarGaussian) -> f64 {
    if a.is_point_mass() || b.is_point_mass() {
        return if a == b { 0.0 } else { f64::INFINITY };
    }
    let r = a.variance / b.variance;
    0.5 * (r - 1.0 - r.ln() + (a.mean - b.mean).powi(2) / b.variance)
}

/// `D_ρ(⊗N(θ_a,j, 1/n) ‖ ⊗N(θ_b,j, 1/n)) = (ρ n / 2) ‖θ_a − θ_b‖²`.
///
/// `rho == 1` is accepted here and gives the KL value `(n/2)‖θ_a − θ_b‖²`.
pub fn product_gaussian_divergence(theta_a: &[f64], theta_b: &[f64], n: f64, rho: f64) -> Result<f64> {
    if theta_a.len() != theta_b.len() {
        return Err(Error::input(format!(
            "length mismatch: {} vs {}",
            theta_a.len(),
            theta_b.len()
        )));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("noise level n must be positive, got {n}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("order must be positive, got {rho}")));
    }
    let sq: f64 = theta_a.iter().zip(theta_b).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(0.5 * rho * n * sq)
}

/// Evaluates all six links of the divergence chain for `(p, q)`.
pub fn chain_report(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<DivergenceReport> {
    check_lengths(p, q)?;
    Ok(DivergenceReport {
        tv: tv_discrete(p, q)?,
        hellinger_sq: hellinger_sq_discrete(p, q)?,
        d_half: renyi_discrete(p, q, 0.5)?,
        kl: kl_discrete(p, q)?,
        d2: renyi_discrete(p, q, 2.0)?,
        chi2: chi2_discrete(p, q)?,
    })
}

/// True iff `D_ρ(p‖q)` is non-decreasing along `rho_grid` up to 1e-10.
pub fn renyi_monotonicity_check(p: &DiscreteDistribution, q: &DiscreteDistribution, rho_grid: &[f64]) -> Result<bool> {
    if rho_grid.is_empty() {
        return Err(Error::input("empty order grid"));
    }
    check_lengths(p, q)?;
    let mut prev = f64::NEG_INFINITY;
    for &rho in rho_grid {
        let d = renyi_discrete(p, q, rho)?;
        if d == f64::INFINITY {
            prev = d;
            continue;
        }
        if d + 1e-10 < prev {
            return Ok(false);
        }
        prev = d;
    }
    Ok(true)
}
