//! Sequence model with the prior `θ_j ~ N(0, j^{−2β−1})` and the explicit
//! variational posterior `Q̂_[k]` that keeps the first `k` coordinates
//! unconstrained and collapses the rest.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gsm::{make_signal, SequenceObservation, SignalKind, SobolevSignal};
use crate::numeric::regression::least_squares;
use crate::numeric::seed::rng_from_seed;
use crate::numeric::{mean_and_stderr, CompensatedSum};

/// `⌈x⌉`, ignoring float noise just above an integer (`1024^{0.2}` is not 5).
pub(crate) fn ceil_robust(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn prior_precision(j: usize, beta: f64) -> f64 {
    (j as f64).powf(2.0 * beta + 1.0)
}

fn check_params(n: f64, beta: f64) -> Result<usize> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain(format!("n must be at least 1, got {n}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta must be non-negative, got {beta}")));
    }
    Ok(n.floor() as usize)
}

/// `Q̂_[k]`: `N(nY_j/(n+j^{2β+1}), 1/(n+j^{2β+1}))` for `j ≤ k`,
/// `N(0, e^{−jn})` for `k < j ≤ n`, and `δ₀` beyond.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncVBPosterior {
    pub k: usize,
    pub coord_means: Vec<f64>,
    pub coord_vars: Vec<f64>,
    pub beta: f64,
    pub n: f64,
}

impl TruncVBPosterior {
    /// Number of non-degenerate coordinates, `⌊n⌋`.
    pub fn dimension(&self) -> usize {
        self.n.floor() as usize
    }

    /// `log Var(θ_j) = −jn` for `k < j ≤ n`. Stored in log form since it underflows.
    pub fn tail_log_variance(&self, j: usize) -> Option<f64> {
        (j > self.k && j <= self.dimension()).then(|| -(j as f64) * self.n)
    }

    /// One draw of `(θ_1, …, θ_len)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        (1..=len)
            .map(|j| {
                if j <= self.k {
                    let z: f64 = rng.sample(StandardNormal);
                    self.coord_means[j - 1] + self.coord_vars[j - 1].sqrt() * z
                } else if let Some(lv) = self.tail_log_variance(j) {
                    let z: f64 = rng.sample(StandardNormal);
                    (0.5 * lv).exp() * z
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn fit_vb_k(obs: &SequenceObservation, beta: f64, k: usize) -> Result<TruncVBPosterior> {
    let n = obs.n;
    let dim = check_params(n, beta)?;
    if k > dim {
        return Err(Error::input(format!("k = {k} exceeds n = {dim}")));
    }
    if k > obs.len() {
        return Err(Error::input(format!("k = {k} exceeds observation length {}", obs.len())));
    }
    let (coord_means, coord_vars) = (1..=k)
        .map(|j| {
            let d = n + prior_precision(j, beta);
            (n * obs.y[j - 1] / d, 1.0 / d)
        })
        .unzip();
    Ok(TruncVBPosterior { k, coord_means, coord_vars, beta, n })
}

/// The five non-negative pieces of the exact risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskTerms {
    pub shrinkage_bias: f64,
    pub truncation_bias: f64,
    pub mean_variance: f64,
    pub posterior_spread: f64,
    pub tail_spread: f64,
}

impl RiskTerms {
    pub fn total(&self) -> f64 {
        self.shrinkage_bias + self.truncation_bias + self.mean_variance + self.posterior_spread + self.tail_spread
    }
}

pub fn exact_risk_terms(signal: &SobolevSignal, n: f64, beta: f64, k: usize) -> Result<RiskTerms> {
    let dim = check_params(n, beta)?;
    if k > dim {
        return Err(Error::input(format!("k = {k} exceeds n = {dim}")));
    }
    let theta = signal.theta();
    let mut shrinkage_bias = CompensatedSum::default();
    let mut mean_variance = CompensatedSum::default();
    let mut posterior_spread = CompensatedSum::default();
    for j in 1..=k {
        let s = prior_precision(j, beta);
        let d = n + s;
        let t = theta.get(j - 1).copied().unwrap_or(0.0);
        shrinkage_bias.add((s / d).powi(2) * t * t);
        mean_variance.add(n / (d * d));
        posterior_spread.add(1.0 / d);
    }
    let truncation_bias: CompensatedSum = theta.iter().skip(k).map(|t| t * t).collect();
    let mut tail = 0.0;
    for j in (k + 1)..=dim {
        let term = (-(j as f64) * n).exp();
        if term == 0.0 {
            break;
        }
        tail += term;
    }
    Ok(RiskTerms {
        shrinkage_bias: shrinkage_bias.value(),
        truncation_bias: truncation_bias.value(),
        mean_variance: mean_variance.value(),
        posterior_spread: posterior_spread.value(),
        tail_spread: tail,
    })
}

/// `P_{θ*} Q̂_[k] ‖θ − θ*‖²` in closed form.
pub fn exact_risk(signal: &SobolevSignal, n: f64, beta: f64, k: usize) -> Result<f64> {
    exact_risk_terms(signal, n, beta, k).map(|t| t.total())
}

/// Sampling estimate of [`exact_risk`]: draw `Y`, then one `θ ~ Q̂_[k]`, per replication.
/// Returns `(mean, stderr)`.
pub fn monte_carlo_risk(signal: &SobolevSignal, n: f64, beta: f64, k: usize, reps: usize, seed: u64) -> Result<(f64, f64)> {
    let dim = check_params(n, beta)?;
    if reps < 2 {
        return Err(Error::input("need at least two replications"));
    }
    let len = signal.len().max(dim);
    let sd = n.sqrt().recip();
    let mut rng = rng_from_seed(seed);
    let theta_star: Vec<f64> = (0..len).map(|i| signal.theta().get(i).copied().unwrap_or(0.0)).collect();
    let mut losses = Vec::with_capacity(reps);
    for _ in 0..reps {
        let y: Vec<f64> = theta_star
            .iter()
            .map(|t| {
                let z: f64 = rng.sample(StandardNormal);
                t + sd * z
            })
            .collect();
        let q = fit_vb_k(&SequenceObservation::new(y, n)?, beta, k)?;
        let draw = q.sample_theta(len, &mut rng);
        losses.push(draw.iter().zip(&theta_star).map(|(a, b)| (a - b).powi(2)).sum());
    }
    Ok(mean_and_stderr(&losses))
}

/// Theoretical exponent of the worst-case risk when `k = n^t`.
pub fn theory_exponent(alpha: f64, beta: f64, t: f64) -> f64 {
    if t <= 1.0 / (2.0 * beta + 1.0) {
        (t - 1.0).max(-2.0 * alpha * t)
    } else {
        -2.0 * alpha.min(beta) / (2.0 * beta + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub fitted_exponent: f64,
    pub theory_exponent: f64,
}

/// Largest exact risk over the adversarial signals at `(n, k)`: spikes at
/// `⌈n^{1/(2β+1)}⌉` and at `k+1`, and the boundary signal.
pub fn worst_case_risk(alpha: f64, beta: f64, radius: f64, n: usize, k: usize) -> Result<f64> {
    let nf = n as f64;
    let mut kinds = vec![SignalKind::SobolevBoundary];
    let j_prior = ceil_robust(nf.powf(1.0 / (2.0 * beta + 1.0))).clamp(1, n);
    kinds.push(SignalKind::Spike { j0: j_prior });
    if k < n {
        kinds.push(SignalKind::Spike { j0: k + 1 });
    }
    let mut worst: f64 = 0.0;
    for kind in kinds {
        let s = make_signal(kind, alpha, radius, n)?;
        worst = worst.max(exact_risk(&s, nf, beta, k)?);
    }
    Ok(worst)
}

/// For each `t`, sets `k = ⌈n^t⌉`, evaluates [`worst_case_risk`] on `n_grid` and
/// regresses log-risk on log-n. Signals use radius 1.
pub fn rate_exponent_curve(alpha: f64, beta: f64, t_grid: &[f64], n_grid: &[usize]) -> Result<Vec<CurvePoint>> {
    if t_grid.is_empty() {
        return Err(Error::input("empty t grid"));
    }
    if n_grid.len() < 3 {
        return Err(Error::input(format!("need at least 3 n values for a fit, got {}", n_grid.len())));
    }
    if let Some(n) = n_grid.iter().find(|&&n| n < 64) {
        return Err(Error::input(format!("n values must be at least 64, got {n}")));
    }
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::domain("alpha and beta must be positive"));
    }
    let log_n: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::input(format!("t = {t} outside (0, 1]")));
            }
            let log_risk = n_grid
                .iter()
                .map(|&n| {
                    let k = ceil_robust((n as f64).powf(t)).min(n);
                    worst_case_risk(alpha, beta, 1.0, n, k).map(f64::ln)
                })
                .collect::<Result<Vec<f64>>>()?;
            let fit = least_squares(&[&log_n], &log_risk)?;
            Ok(CurvePoint { t, fitted_exponent: fit.coefficients[1], theory_exponent: theory_exponent(alpha, beta, t) })
        })
        .collect()
}
