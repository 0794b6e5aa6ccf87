//! Exponential family on `[0, 1]` in a trigonometric basis:
//! `p_θ(x) = exp(Σ_j θ_j φ_j(x) − c(θ))` with `φ_{2l−1} = √2 cos(2πlx)`,
//! `φ_{2l} = √2 sin(2πlx)` and no constant term.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gsm::SievePrior;
use crate::numeric::seed::rng_from_seed;
use crate::numeric::{log_sum_exp, quadrature};

/// Name of the basis enumeration, written into every serialized object.
pub const BASIS: &str = "phi_{2l-1}=sqrt2*cos(2*pi*l*x), phi_{2l}=sqrt2*sin(2*pi*l*x), theta_0=0";

const QUAD_TOL: f64 = 1e-10;
const CDF_POINTS: usize = 4096;
/// Nodes of the equispaced rule used inside the ELBO. The integrands are smooth
/// and 1-periodic, where this rule converges geometrically.
const PERIODIC_NODES: usize = 512;

/// `φ_j(x)` for `j ≥ 1`.
pub fn basis(j: usize, x: f64) -> f64 {
    let l = j.div_ceil(2) as f64;
    let arg = 2.0 * PI * l * x;
    if j % 2 == 1 {
        SQRT_2 * arg.cos()
    } else {
        SQRT_2 * arg.sin()
    }
}

/// `Σ_j θ_j φ_j(x)`.
pub fn log_potential(theta: &[f64], x: f64) -> f64 {
    theta.iter().enumerate().map(|(i, t)| t * basis(i + 1, x)).sum()
}

fn check_theta(theta: &[f64]) -> Result<()> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::input("non-finite coefficient"));
    }
    Ok(())
}

/// `c(θ) = log ∫₀¹ exp(Σ θ_j φ_j)` by adaptive Gauss–Legendre.
pub fn log_normalizer(theta: &[f64]) -> Result<f64> {
    check_theta(theta)?;
    if theta.iter().all(|&t| t == 0.0) {
        return Ok(0.0);
    }
    quadrature::integrate_log(|x| log_potential(theta, x), 0.0, 1.0, QUAD_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierDensity {
    theta: Vec<f64>,
    log_normalizer: f64,
    basis: &'static str,
}

impl FourierDensity {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let log_normalizer = log_normalizer(&theta)?;
        Ok(Self { theta, log_normalizer, basis: BASIS })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::input(format!("x = {x} outside [0, 1]")));
        }
        Ok(log_potential(&self.theta, x) - self.log_normalizer)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.log_pdf(x).map(f64::exp)
    }

    /// `m` draws by inverse CDF on a 4096-cell grid with linear interpolation.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        let h = 1.0 / CDF_POINTS as f64;
        let dens: Vec<f64> = (0..=CDF_POINTS)
            .map(|i| (log_potential(&self.theta, i as f64 * h) - self.log_normalizer).exp())
            .collect();
        let mut cdf = vec![0.0; CDF_POINTS + 1];
        for i in 1..=CDF_POINTS {
            cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
        }
        let total = cdf[CDF_POINTS];
        cdf.iter_mut().for_each(|c| *c /= total);
        let mut rng = rng_from_seed(seed);
        (0..m)
            .map(|_| {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).clamp(1, CDF_POINTS);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                ((i - 1) as f64 + frac) * h
            })
            .collect()
    }

    /// `E_θ φ_j(X) = ∂c/∂θ_j` for `j = 1..=len`.
    pub fn basis_means(&self, len: usize) -> Result<Vec<f64>> {
        (1..=len)
            .map(|j| {
                quadrature::integrate(
                    |x| basis(j, x) * (log_potential(&self.theta, x) - self.log_normalizer).exp(),
                    0.0,
                    1.0,
                    QUAD_TOL,
                )
                .or_else(|_| {
                    // Mean-zero integrands may never satisfy a relative criterion.
                    Ok(quadrature::gl20().composite(
                        |x| basis(j, x) * (log_potential(&self.theta, x) - self.log_normalizer).exp(),
                        0.0,
                        1.0,
                        256,
                    ))
                })
            })
            .collect()
    }
}

fn padded(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let len = a.len().max(b.len());
    let pad = |v: &[f64]| {
        let mut w = v.to_vec();
        w.resize(len, 0.0);
        w
    };
    (pad(a), pad(b))
}

/// Hellinger distance `sqrt(1 − ∫ √(p_a p_b))`.
pub fn hellinger_numeric(theta_a: &[f64], theta_b: &[f64]) -> Result<f64> {
    let (a, b) = padded(theta_a, theta_b);
    let (ca, cb) = (log_normalizer(&a)?, log_normalizer(&b)?);
    let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
    let log_affinity = log_normalizer(&mid)? - 0.5 * (ca + cb);
    Ok((-log_affinity.exp_m1()).clamp(0.0, 1.0).sqrt())
}

/// `KL(p_a‖p_b) = E_a[Σ (θ_a − θ_b)_j φ_j] − c(θ_a) + c(θ_b)`.
pub fn kl_numeric(theta_a: &[f64], theta_b: &[f64]) -> Result<f64> {
    let (a, b) = padded(theta_a, theta_b);
    let pa = FourierDensity::new(a.clone())?;
    let cb = log_normalizer(&b)?;
    let means = pa.basis_means(a.len())?;
    let cross: f64 = a.iter().zip(&b).zip(&means).map(|((x, y), m)| (x - y) * m).sum();
    Ok((cross - pa.log_normalizer + cb).max(0.0))
}

/// `D₂(p_a‖p_b) = c(2θ_a − θ_b) − 2c(θ_a) + c(θ_b)`.
pub fn d2_numeric(theta_a: &[f64], theta_b: &[f64]) -> Result<f64> {
    let (a, b) = padded(theta_a, theta_b);
    let two: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
    Ok((log_normalizer(&two)? - 2.0 * log_normalizer(&a)? + log_normalizer(&b)?).max(0.0))
}

/// Product of independent Gaussians over the first `k` coefficients; zero variance
/// encodes a point mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussMFVariational {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub basis: &'static str,
}

impl GaussMFVariational {
    pub fn new(mu: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma2.len() || mu.is_empty() {
            return Err(Error::input("mu and sigma2 must be non-empty and of equal length"));
        }
        if mu.iter().any(|m| !m.is_finite()) || sigma2.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::input("need finite means and non-negative finite variances"));
        }
        Ok(Self { mu, sigma2, basis: BASIS })
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }
}

/// Equispaced nodes with `φ_j` tabulated; shared by the ELBO value and gradient.
struct PeriodicRule {
    /// `table[j][m] = φ_{j+1}(x_m)`.
    table: Vec<Vec<f64>>,
}

impl PeriodicRule {
    fn new(k: usize) -> Self {
        let table = (1..=k)
            .map(|j| (0..PERIODIC_NODES).map(|m| basis(j, m as f64 / PERIODIC_NODES as f64)).collect())
            .collect();
        Self { table }
    }

    /// `c(θ)` and, if requested, `E_θ φ_j` for each `j`.
    fn normalizer_and_means(&self, theta: &[f64], want_means: bool) -> (f64, Vec<f64>) {
        let logs: Vec<f64> = (0..PERIODIC_NODES)
            .map(|m| theta.iter().zip(&self.table).map(|(t, row)| t * row[m]).sum())
            .collect();
        let lse = log_sum_exp(&logs);
        let c = lse - (PERIODIC_NODES as f64).ln();
        if !want_means {
            return (c, Vec::new());
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
        let means = self.table.iter().map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
        (c, means)
    }
}

/// Monte Carlo settings for the ELBO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfOptions {
    /// Common-random-number draws for `E_q c(θ)`.
    pub samples: usize,
    pub seed: u64,
    /// Initial step for gradient ascent on the per-observation ELBO.
    pub step: f64,
    pub max_iter: usize,
    /// Relative ELBO improvement below which ascent stops.
    pub tol: f64,
}

impl Default for MfOptions {
    fn default() -> Self {
        Self { samples: 64, seed: 0, step: 0.5, max_iter: 500, tol: 1e-10 }
    }
}

/// Components of the ELBO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElboValue {
    pub value: f64,
    pub expected_log_likelihood: f64,
    /// `KL(Q‖Π)` where `Q` puts all its mass on model `k`; includes `−log π(k)`.
    pub kl: f64,
    /// True when a zero variance meets a continuous prior coordinate (`KL = +∞`).
    pub degenerate: bool,
}

/// Precomputed data summaries, prior variances and CRN draws for one `(data, prior, k)`.
pub struct ElboProblem {
    n: f64,
    stats: Vec<f64>,
    prior_var: Vec<f64>,
    log_pi_k: f64,
    eps: Vec<Vec<f64>>,
    rule: PeriodicRule,
}

impl ElboProblem {
    pub fn new(data: &[f64], prior: &SievePrior, k: usize, opts: &MfOptions) -> Result<Self> {
        if k == 0 || k > prior.k_max() {
            return Err(Error::input(format!("active length {k} outside 1..={}", prior.k_max())));
        }
        if data.is_empty() || data.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::input("data must be non-empty and lie in [0, 1]"));
        }
        if opts.samples == 0 {
            return Err(Error::input("need at least one Monte Carlo sample"));
        }
        let prior_var = (1..=k)
            .map(|j| {
                prior.family(j)?.conjugate_variance().ok_or_else(|| {
                    Error::input("the Gaussian mean-field ELBO needs Gaussian prior coordinates")
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let stats = (1..=k).map(|j| data.iter().map(|&x| basis(j, x)).sum()).collect();
        let mut rng = rng_from_seed(opts.seed);
        let eps = (0..opts.samples)
            .map(|_| (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Ok(Self {
            n: data.len() as f64,
            stats,
            prior_var,
            log_pi_k: prior.dimension_weights()[k].ln(),
            eps,
            rule: PeriodicRule::new(k),
        })
    }

    fn k(&self) -> usize {
        self.stats.len()
    }

    /// ELBO and optionally its gradient in `(μ, log σ)`.
    fn evaluate(&self, mu: &[f64], sigma2: &[f64], want_grad: bool) -> (ElboValue, Vec<f64>, Vec<f64>) {
        let k = self.k();
        let sd: Vec<f64> = sigma2.iter().map(|s| s.sqrt()).collect();
        let s_count = self.eps.len() as f64;
        let mut mean_c = 0.0;
        let mut grad_mu = vec![0.0; k];
        let mut grad_rho = vec![0.0; k];
        for e in &self.eps {
            let theta: Vec<f64> = (0..k).map(|j| mu[j] + sd[j] * e[j]).collect();
            let (c, means) = self.rule.normalizer_and_means(&theta, want_grad);
            mean_c += c / s_count;
            if want_grad {
                for j in 0..k {
                    grad_mu[j] -= self.n * means[j] / s_count;
                    grad_rho[j] -= self.n * means[j] * e[j] * sd[j] / s_count;
                }
            }
        }
        let linear: f64 = mu.iter().zip(&self.stats).map(|(m, t)| m * t).sum();
        let expected_log_likelihood = linear - self.n * mean_c;
        let mut kl = -self.log_pi_k;
        let mut degenerate = false;
        for j in 0..k {
            let v = self.prior_var[j];
            if sigma2[j] == 0.0 {
                degenerate = true;
            } else {
                kl += 0.5 * ((sigma2[j] + mu[j] * mu[j]) / v - 1.0 - (sigma2[j] / v).ln());
            }
            if want_grad {
                grad_mu[j] += self.stats[j] - mu[j] / v;
                grad_rho[j] -= sigma2[j] / v - 1.0;
            }
        }
        if degenerate {
            kl = f64::INFINITY;
        }
        let value = expected_log_likelihood - kl;
        (ElboValue { value, expected_log_likelihood, kl, degenerate }, grad_mu, grad_rho)
    }

    pub fn elbo(&self, q: &GaussMFVariational) -> Result<ElboValue> {
        if q.k() != self.k() {
            return Err(Error::input(format!("variational length {} differs from {}", q.k(), self.k())));
        }
        Ok(self.evaluate(&q.mu, &q.sigma2, false).0)
    }

    /// Gradient of the ELBO in `(μ, log σ)` at the fixed CRN draws.
    pub fn gradient(&self, q: &GaussMFVariational) -> Result<(Vec<f64>, Vec<f64>)> {
        if q.k() != self.k() {
            return Err(Error::input(format!("variational length {} differs from {}", q.k(), self.k())));
        }
        let (_, gm, gr) = self.evaluate(&q.mu, &q.sigma2, true);
        Ok((gm, gr))
    }
}

/// `E_Q[Σ_i log p_θ(X_i)] − KL(Q‖Π)` with `E_Q c(θ)` estimated from
/// `opts.samples` reparameterized draws seeded by `opts.seed`.
pub fn elbo(q: &GaussMFVariational, data: &[f64], prior: &SievePrior, opts: &MfOptions) -> Result<ElboValue> {
    ElboProblem::new(data, prior, q.k(), opts)?.elbo(q)
}

/// Result of [`fit_gaussian_mf`].
#[derive(Debug, Clone, Serialize)]
pub struct MfFit {
    pub q: GaussMFVariational,
    pub elbo: f64,
    pub initial_elbo: f64,
    pub iterations: usize,
    pub elbo_trace: Vec<f64>,
}

const SIGMA2_FLOOR: f64 = 1e-12;

/// Gradient ascent with backtracking on `(μ, log σ)` of the CRN ELBO.
/// Starts from `μ = 0`, `σ² = 1/n`. The `μ` step is scaled by `1/n` and the
/// `log σ` step by `1/2`, roughly the inverse curvatures of the two blocks.
pub fn fit_gaussian_mf(data: &[f64], prior: &SievePrior, k: usize, opts: &MfOptions) -> Result<MfFit> {
    if !(opts.step > 0.0 && opts.step.is_finite()) || opts.max_iter == 0 {
        return Err(Error::Config("step must be positive and max_iter at least 1".into()));
    }
    let pb = ElboProblem::new(data, prior, k, opts)?;
    let n = pb.n;
    let mut mu = vec![0.0; k];
    let mut rho = vec![-0.5 * n.ln(); k];
    let to_var = |rho: &[f64]| -> Vec<f64> { rho.iter().map(|r| (2.0 * r).exp().max(SIGMA2_FLOOR)).collect() };
    let (mut cur, mut gm, mut gr) = pb.evaluate(&mu, &to_var(&rho), true);
    let initial_elbo = cur.value;
    let mut trace = vec![cur.value];
    let mut step = opts.step;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut accepted = false;
        for _ in 0..40 {
            let mu_new: Vec<f64> = mu.iter().zip(&gm).map(|(m, g)| m + step * g / n).collect();
            let rho_new: Vec<f64> = rho.iter().zip(&gr).map(|(r, g)| r + 0.5 * step * g).collect();
            let (cand, gm2, gr2) = pb.evaluate(&mu_new, &to_var(&rho_new), true);
            if cand.value.is_finite() && cand.value > cur.value {
                let gain = cand.value - cur.value;
                mu = mu_new;
                rho = rho_new;
                cur = cand;
                gm = gm2;
                gr = gr2;
                step *= 1.2;
                accepted = true;
                trace.push(cur.value);
                if gain <= opts.tol * cur.value.abs().max(1.0) {
                    accepted = false;
                }
                break;
            }
            step *= 0.5;
        }
        if cur.value < -1e12 {
            return Err(Error::Optimization(format!("ELBO diverged to {}", cur.value)));
        }
        if !accepted {
            break;
        }
    }
    let q = GaussMFVariational::new(mu, to_var(&rho))?;
    Ok(MfFit { q, elbo: cur.value, initial_elbo, iterations, elbo_trace: trace })
}
