//! Location mixtures of the kernel `ψ_σ(x) = exp(−(|x|/σ)^p) / (2σΓ(1+1/p))`, fitted by
//! coordinate ascent over `q(τ) q(w) ∏_j q(μ_j) ∏_i q(z_i)` with `τ = σ⁻²`.
//!
//! Only `p = 2` is fitted: then `ψ_σ` is the `N(0, σ²/2)` density, every factor
//! is conjugate, and each update is an exact coordinate maximization.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::divergence::ScalarGaussian;
use crate::error::{Error, Result};
use crate::numeric::seed::rng_from_seed;
use crate::numeric::{log_sum_exp, quadrature};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const REL_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 1000;

fn check_power(p: u32) -> Result<()> {
    if p == 0 || p % 2 == 1 {
        return Err(Error::input(format!("kernel power must be a positive even integer, got {p}")));
    }
    Ok(())
}

pub fn kernel_psi(x: f64, sigma: f64, p: u32) -> Result<f64> {
    check_power(p)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let z = (x.abs() / sigma).powi(p as i32);
    Ok((-z - (2.0 * sigma).ln() - ln_gamma(1.0 + 1.0 / p as f64)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub k: usize,
    pub mu: Vec<f64>,
    pub w: Vec<f64>,
    pub sigma: f64,
    pub p: u32,
}

impl MixtureModel {
    pub fn new(mu: Vec<f64>, w: Vec<f64>, sigma: f64, p: u32) -> Result<Self> {
        check_power(p)?;
        if mu.is_empty() || mu.len() != w.len() {
            return Err(Error::input("need equally many (non-zero) locations and weights"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::input("weights must be non-negative and locations finite"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("weights sum to {total}")));
        }
        Ok(Self { k: mu.len(), mu, w, sigma, p })
    }

    /// Draws `m` observations.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        assert_eq!(self.p, 2, "sampling is implemented for the Gaussian kernel");
        let mut rng = rng_from_seed(seed);
        let sd = self.sigma / std::f64::consts::SQRT_2;
        (0..m)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut j = self.k - 1;
                for (i, w) in self.w.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        j = i;
                        break;
                    }
                }
                let z: f64 = rng.sample(StandardNormal);
                self.mu[j] + sd * z
            })
            .collect()
    }
}

/// `Σ_j w_j ψ_σ(x − μ_j)`.
pub fn mixture_pdf(model: &MixtureModel, x: f64) -> f64 {
    model
        .mu
        .iter()
        .zip(&model.w)
        .map(|(m, w)| w * kernel_psi(x - m, model.sigma, model.p).expect("validated model"))
        .sum()
}

/// Prior hyperparameters: `k ~ Poisson(ξ₀)`, `μ_j ~ N(0, σ₀²)`, `w ~ Dir(α₀)`, `τ ~ Gamma(a₀, b₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureHyper {
    pub xi0: f64,
    pub sigma0_sq: f64,
    pub alpha0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for MixtureHyper {
    fn default() -> Self {
        Self { xi0: 1.0, sigma0_sq: 25.0, alpha0: 1.0, a0: 1.0, b0: 1.0 }
    }
}

impl MixtureHyper {
    fn validate(&self) -> Result<()> {
        let vals = [self.xi0, self.sigma0_sq, self.alpha0, self.a0, self.b0];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("hyperparameters must be positive: {self:?}")));
        }
        Ok(())
    }

    /// `log Poisson(ξ₀)(k)`.
    pub fn log_prior_k(&self, k: usize) -> f64 {
        k as f64 * self.xi0.ln() - self.xi0 - ln_gamma(k as f64 + 1.0)
    }
}

/// Variational factors, responsibilities and the ELBO after each sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GMFState {
    pub k: usize,
    pub q_mu: Vec<ScalarGaussian>,
    /// Dirichlet concentrations.
    pub q_w: Vec<f64>,
    /// Gamma shape and rate for `τ`.
    pub q_tau: (f64, f64),
    pub responsibilities: Vec<Vec<f64>>,
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

impl GMFState {
    pub fn elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("trace is never empty")
    }

    pub fn expected_tau(&self) -> f64 {
        self.q_tau.0 / self.q_tau.1
    }

    /// Mixture at the posterior means of `w`, `μ` and `τ`.
    pub fn plug_in(&self) -> MixtureModel {
        let total: f64 = self.q_w.iter().sum();
        let w: Vec<f64> = self.q_w.iter().map(|a| a / total).collect();
        let sum: f64 = w.iter().sum();
        MixtureModel {
            k: self.k,
            mu: self.q_mu.iter().map(|g| g.mean).collect(),
            w: w.into_iter().map(|x| x / sum).collect(),
            sigma: self.expected_tau().powf(-0.5),
            p: 2,
        }
    }

    /// One mixture drawn from the variational posterior.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MixtureModel> {
        let w = if self.k == 1 {
            vec![1.0]
        } else {
            // Normalized independent Gamma(α_j, 1) draws.
            let mut w = self
                .q_w
                .iter()
                .map(|&a| {
                    Gamma::new(a, 1.0).map(|g| g.sample(rng)).map_err(|e| Error::numeric(e.to_string()))
                })
                .collect::<Result<Vec<f64>>>()?;
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            w
        };
        let mu = self
            .q_mu
            .iter()
            .map(|g| {
                let z: f64 = rng.sample(StandardNormal);
                g.mean + g.variance.sqrt() * z
            })
            .collect();
        let gamma = Gamma::new(self.q_tau.0, 1.0 / self.q_tau.1).map_err(|e| Error::numeric(e.to_string()))?;
        let tau: f64 = gamma.sample(rng);
        MixtureModel::new(mu, w, tau.powf(-0.5), 2)
    }
}

struct Moments {
    m: Vec<f64>,
    s2: Vec<f64>,
    alpha: Vec<f64>,
    a: f64,
    b: f64,
}

fn update_responsibilities(x: &[f64], mo: &Moments, r: &mut [Vec<f64>]) {
    let asum: f64 = mo.alpha.iter().sum();
    let e_log_w: Vec<f64> = mo.alpha.iter().map(|a| digamma(*a) - digamma(asum)).collect();
    let e_tau = mo.a / mo.b;
    let half_e_log_tau = 0.5 * (digamma(mo.a) - mo.b.ln());
    for (xi, row) in x.iter().zip(r.iter_mut()) {
        let logs: Vec<f64> = (0..mo.m.len())
            .map(|j| e_log_w[j] + half_e_log_tau - e_tau * ((xi - mo.m[j]).powi(2) + mo.s2[j]))
            .collect();
        let z = log_sum_exp(&logs);
        for (rj, l) in row.iter_mut().zip(&logs) {
            *rj = (l - z).exp();
        }
    }
}

fn elbo_value(x: &[f64], r: &[Vec<f64>], mo: &Moments, h: &MixtureHyper) -> f64 {
    let k = mo.m.len();
    let kf = k as f64;
    let asum: f64 = mo.alpha.iter().sum();
    let e_log_w: Vec<f64> = mo.alpha.iter().map(|a| digamma(*a) - digamma(asum)).collect();
    let e_tau = mo.a / mo.b;
    let e_log_tau = digamma(mo.a) - mo.b.ln();
    let mut lik = 0.0;
    let mut z_terms = 0.0;
    for (xi, row) in x.iter().zip(r) {
        for j in 0..k {
            let rij = row[j];
            if rij > 0.0 {
                lik += rij
                    * (0.5 * (std::f64::consts::LN_2 + e_log_tau) - 0.5 * LN_2PI
                        - e_tau * ((xi - mo.m[j]).powi(2) + mo.s2[j]));
                z_terms += rij * (e_log_w[j] - rij.ln());
            }
        }
    }
    let log_p_w = ln_gamma(kf * h.alpha0) - kf * ln_gamma(h.alpha0)
        + (h.alpha0 - 1.0) * e_log_w.iter().sum::<f64>();
    let log_q_w = ln_gamma(asum) - mo.alpha.iter().map(|a| ln_gamma(*a)).sum::<f64>()
        + mo.alpha.iter().zip(&e_log_w).map(|(a, e)| (a - 1.0) * e).sum::<f64>();
    let mu_terms: f64 = (0..k)
        .map(|j| {
            -0.5 * (LN_2PI + h.sigma0_sq.ln()) - (mo.m[j].powi(2) + mo.s2[j]) / (2.0 * h.sigma0_sq)
                + 0.5 * (1.0 + LN_2PI + mo.s2[j].ln())
        })
        .sum();
    let log_p_tau = h.a0 * h.b0.ln() - ln_gamma(h.a0) + (h.a0 - 1.0) * e_log_tau - h.b0 * e_tau;
    let entropy_tau = mo.a - mo.b.ln() + ln_gamma(mo.a) + (1.0 - mo.a) * digamma(mo.a);
    lik + z_terms + log_p_w - log_q_w + mu_terms + log_p_tau + entropy_tau
}

/// Quantile-spread centres with seeded jitter.
fn initial_moments(x: &[f64], k: usize, h: &MixtureHyper, seed: u64) -> Moments {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).max(1e-8);
    let mut rng = rng_from_seed(seed);
    let m = (0..k)
        .map(|j| {
            let q = sorted[((j as f64 + 0.5) / k as f64 * n as f64) as usize];
            let z: f64 = rng.sample(StandardNormal);
            q + 0.1 * var.sqrt() / k as f64 * z
        })
        .collect();
    let tau0 = (k * k) as f64 / (2.0 * var);
    let a = h.a0 + 0.5 * n as f64;
    Moments {
        m,
        s2: vec![var / n as f64; k],
        alpha: vec![h.alpha0 + n as f64 / k as f64; k],
        a,
        b: a / tau0,
    }
}

/// Coordinate ascent at fixed `k`, cycling responsibilities, `q(w)`, `q(μ)`, `q(τ)`
/// until the relative ELBO change falls below `1e-8` or 1000 sweeps.
pub fn cavi_fixed_k(data: &[f64], k: usize, hyper: &MixtureHyper, seed: u64) -> Result<GMFState> {
    if data.is_empty() {
        return Err(Error::input("empty data"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite observation"));
    }
    if k == 0 {
        return Err(Error::input("k must be positive"));
    }
    hyper.validate()?;
    let n = data.len();
    let mut mo = initial_moments(data, k, hyper, seed);
    let mut r = vec![vec![0.0; k]; n];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        update_responsibilities(data, &mo, &mut r);
        let counts: Vec<f64> = (0..k).map(|j| r.iter().map(|row| row[j]).sum()).collect();
        mo.alpha = counts.iter().map(|c| hyper.alpha0 + c).collect();
        let e_tau = mo.a / mo.b;
        for j in 0..k {
            let prec = 1.0 / hyper.sigma0_sq + 2.0 * e_tau * counts[j];
            let sx: f64 = r.iter().zip(data).map(|(row, x)| row[j] * x).sum();
            mo.m[j] = 2.0 * e_tau * sx / prec;
            mo.s2[j] = 1.0 / prec;
        }
        mo.a = hyper.a0 + 0.5 * n as f64;
        mo.b = hyper.b0
            + r.iter()
                .zip(data)
                .map(|(row, x)| (0..k).map(|j| row[j] * ((x - mo.m[j]).powi(2) + mo.s2[j])).sum::<f64>())
                .sum::<f64>();
        let e = elbo_value(data, &r, &mo, hyper);
        if !e.is_finite() {
            return Err(Error::numeric("ELBO became non-finite"));
        }
        let done = trace.last().is_some_and(|&prev: &f64| (e - prev).abs() <= REL_TOL * e.abs().max(1.0));
        trace.push(e);
        if done {
            converged = true;
            break;
        }
    }
    let q_mu = mo
        .m
        .iter()
        .zip(&mo.s2)
        .map(|(&m, &s)| ScalarGaussian::new(m, s))
        .collect::<Result<_>>()?;
    Ok(GMFState { k, q_mu, q_w: mo.alpha, q_tau: (mo.a, mo.b), responsibilities: r, elbo_trace: trace, converged })
}

/// Fits every candidate and keeps the largest `ELBO + log Poisson(ξ₀)(k)`; ties go to the smaller `k`.
pub fn select_k(data: &[f64], k_candidates: &[usize], hyper: &MixtureHyper, seed: u64) -> Result<(usize, GMFState)> {
    if k_candidates.is_empty() {
        return Err(Error::input("no candidate k"));
    }
    let fits: Vec<(usize, Result<GMFState>)> =
        k_candidates.par_iter().map(|&k| (k, cavi_fixed_k(data, k, hyper, seed))).collect();
    let mut best: Option<(f64, usize, GMFState)> = None;
    let mut last_err = None;
    for (k, fit) in fits {
        match fit {
            Ok(state) => {
                let score = state.elbo() + hyper.log_prior_k(k);
                let better = match &best {
                    None => true,
                    Some((s, bk, _)) => score > *s || (score == *s && k < *bk),
                };
                if better {
                    best = Some((score, k, state));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, k, state)) => Ok((k, state)),
        None => Err(last_err.unwrap_or_else(|| Error::numeric("every candidate fit failed"))),
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("grid must have at least three increasing points"));
    }
    Ok(())
}

fn hellinger_sq_on_grid(f: impl Fn(f64) -> f64, f0: &dyn Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    let fv: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let gv: Vec<f64> = grid.iter().map(|&x| f0(x)).collect();
    for (name, v) in [("fitted density", &fv), ("truth", &gv)] {
        let mass = quadrature::trapezoid(grid, v);
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::input(format!("{name} integrates to {mass} on the grid; refine or widen it")));
        }
    }
    let sq: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).collect();
    Ok(0.5 * quadrature::trapezoid(grid, &sq))
}

/// `H²` between the plug-in mixture and `f0` by the trapezoid rule on `grid`.
pub fn hellinger_to_truth(state: &GMFState, f0: &dyn Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    check_grid(grid)?;
    let model = state.plug_in();
    hellinger_sq_on_grid(|x| mixture_pdf(&model, x), f0, grid)
}

/// `E_Q H²(f, f0)` averaged over `draws` mixtures sampled from the variational posterior.
pub fn hellinger_under_posterior(state: &GMFState, f0: &dyn Fn(f64) -> f64, grid: &[f64], draws: usize, seed: u64) -> Result<f64> {
    check_grid(grid)?;
    if draws == 0 {
        return Err(Error::input("need at least one draw"));
    }
    let mut rng = rng_from_seed(seed);
    let mut total = 0.0;
    for _ in 0..draws {
        let m = state.sample_model(&mut rng)?;
        total += hellinger_sq_on_grid(|x| mixture_pdf(&m, x), f0, grid)?;
    }
    Ok(total / draws as f64)
}

/// Equally spaced grid on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + i as f64 * step).collect()
}
