use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::prior::{CoordinateFamily, SievePrior};
use super::signal::{SequenceObservation, SobolevSignal};
use crate::divergence::{kl_gaussian, ScalarGaussian};
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_sum_exp, quadrature};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const EVIDENCE_TOL: f64 = 1e-10;
const GRID_POINTS: usize = 2001;
const GRID_HALF_WIDTH_SD: f64 = 10.0;

fn evidence_window(family: &CoordinateFamily, y: f64, n: f64) -> (f64, f64) {
    let half = 10.0 / n.sqrt() + 10.0 * family.width();
    (y - half, y + half)
}

/// `log W_j = log ∫ f_j(θ) exp(−n(θ − y_j)²/2) dθ` for coordinate `j` (1-based).
pub fn log_coordinate_evidence(prior: &SievePrior, j: usize, y: f64, n: f64) -> Result<f64> {
    if !(n > 0.0 && n.is_finite()) || !y.is_finite() {
        return Err(Error::domain(format!("need finite y and n > 0, got y={y}, n={n}")));
    }
    let family = prior.family(j)?;
    log_evidence_for(family, y, n)
}

fn log_evidence_for(family: &CoordinateFamily, y: f64, n: f64) -> Result<f64> {
    match family.conjugate_variance() {
        Some(v) => {
            // ∫ N(θ; 0, v) e^{−n(θ−y)²/2} dθ = √(2π/n) · N(y; 0, v + 1/n)
            let s2 = v + 1.0 / n;
            Ok(0.5 * (LN_2PI - n.ln()) - 0.5 * (LN_2PI + s2.ln()) - y * y / (2.0 * s2))
        }
        None => {
            let (lo, hi) = evidence_window(family, y, n);
            quadrature::integrate_log(
                |t| family.log_pdf(t) - 0.5 * n * (t - y).powi(2),
                lo,
                hi,
                EVIDENCE_TOL,
            )
        }
    }
}

/// How a tilted coordinate density `f̃_j ∝ f_j · exp(−n(θ−y_j)²/2)` is stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TiltRepresentation {
    Gaussian(ScalarGaussian),
    /// Equally spaced atoms with normalized probabilities.
    Grid { points: Vec<f64>, probabilities: Vec<f64> },
}

/// The per-coordinate posterior `f̃_j` together with `log W_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateTilt {
    pub representation: TiltRepresentation,
    pub log_evidence: f64,
    family: CoordinateFamily,
    y: f64,
    n: f64,
}

impl CoordinateTilt {
    pub fn new(family: &CoordinateFamily, y: f64, n: f64) -> Result<Self> {
        let log_evidence = log_evidence_for(family, y, n)?;
        let representation = match family.conjugate_variance() {
            Some(v) => {
                let precision = n + 1.0 / v;
                ScalarGaussian::new(n * y / precision, 1.0 / precision).map(TiltRepresentation::Gaussian)?
            }
            None => {
                let (lo, hi) = evidence_window(family, y, n);
                let log_tilt = |t: f64| family.log_pdf(t) - 0.5 * n * (t - y).powi(2) - log_evidence;
                let m1 = quadrature::integrate(|t| t * log_tilt(t).exp(), lo, hi, 1e-10)?;
                let m2 = quadrature::integrate(|t| (t - m1).powi(2) * log_tilt(t).exp(), lo, hi, 1e-10)?;
                let sd = m2.max(0.0).sqrt();
                if !(sd > 0.0) {
                    return Err(Error::numeric("degenerate tilt variance"));
                }
                let start = m1 - GRID_HALF_WIDTH_SD * sd;
                let step = 2.0 * GRID_HALF_WIDTH_SD * sd / (GRID_POINTS - 1) as f64;
                let points: Vec<f64> = (0..GRID_POINTS).map(|i| start + i as f64 * step).collect();
                let logs: Vec<f64> = points.iter().map(|&t| log_tilt(t)).collect();
                let z = log_sum_exp(&logs);
                let probabilities = logs.iter().map(|l| (l - z).exp()).collect();
                TiltRepresentation::Grid { points, probabilities }
            }
        };
        Ok(Self { representation, log_evidence, family: *family, y, n })
    }

    pub fn mean(&self) -> f64 {
        match &self.representation {
            TiltRepresentation::Gaussian(g) => g.mean,
            TiltRepresentation::Grid { points, probabilities } => {
                points.iter().zip(probabilities).map(|(x, p)| x * p).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        self.second_moment_about(self.mean())
    }

    /// `E (θ − c)²` under the tilt.
    pub fn second_moment_about(&self, c: f64) -> f64 {
        match &self.representation {
            TiltRepresentation::Gaussian(g) => g.second_moment_about(c),
            TiltRepresentation::Grid { points, probabilities } => {
                points.iter().zip(probabilities).map(|(x, p)| p * (x - c).powi(2)).sum()
            }
        }
    }

    /// Exact log-density of `f̃_j` (not the grid approximation).
    pub fn log_density(&self, t: f64) -> f64 {
        self.family.log_pdf(t) - 0.5 * self.n * (t - self.y).powi(2) - self.log_evidence
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.representation {
            TiltRepresentation::Gaussian(g) => {
                let z: f64 = rng.sample(StandardNormal);
                g.mean + g.variance.sqrt() * z
            }
            TiltRepresentation::Grid { points, probabilities } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (x, p) in points.iter().zip(probabilities) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *points.last().unwrap()
            }
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.representation, TiltRepresentation::Grid { .. })
    }
}

fn check_obs(prior: &SievePrior, obs: &SequenceObservation) -> Result<()> {
    if obs.len() != prior.k_max() {
        return Err(Error::input(format!(
            "observation length {} differs from K_max = {}",
            obs.len(),
            prior.k_max()
        )));
    }
    Ok(())
}

/// Normalized `log π(k | Y)` for `k = 0..=K_max`.
pub fn log_model_weights(prior: &SievePrior, obs: &SequenceObservation) -> Result<Vec<f64>> {
    check_obs(prior, obs)?;
    let n = obs.n;
    let mut raw = Vec::with_capacity(prior.k_max() + 1);
    // log π(k) + Σ_{j≤k} (log W_j + n y_j²/2), dropping the k-free term −Σ_j n y_j²/2.
    let mut acc = 0.0;
    raw.push(prior.dimension_weights()[0].ln());
    for j in 1..=prior.k_max() {
        let y = obs.y[j - 1];
        acc += log_coordinate_evidence(prior, j, y, n)? + 0.5 * n * y * y;
        raw.push(prior.dimension_weights()[j].ln() + acc);
    }
    let z = log_sum_exp(&raw);
    if !z.is_finite() {
        return Err(Error::numeric("all model weights vanish"));
    }
    Ok(raw.into_iter().map(|r| r - z).collect())
}

/// `log(π(k−1|Y) + π(k|Y))` with `π(−1|Y) = 0`.
fn log_pair_mass(log_w: &[f64], k: usize) -> f64 {
    if k == 0 {
        log_w[0]
    } else {
        log_add_exp(log_w[k - 1], log_w[k])
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// A posterior that factorizes over coordinates; used for risk evaluation and sampling.
pub trait ProductPosterior {
    /// `E_Q (θ_j − c)²` for coordinate `j` (1-based).
    fn coordinate_second_moment(&self, j: usize, c: f64) -> f64;

    /// One draw of `(θ_1, …, θ_len)`.
    fn sample_theta<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64>;
}

/// The closed-form mean-field posterior: `f̃_j` below `k̃`, the mixture
/// `p̃ δ₀ + (1−p̃) f̃_k̃` at `k̃`, and `δ₀` above.
#[derive(Debug, Clone, Serialize)]
pub struct MeanFieldSeqPosterior {
    pub k_tilde: usize,
    pub p_tilde: f64,
    pub tilts: Vec<CoordinateTilt>,
}

/// Empirical-Bayes posterior: `f̃_j` for `j ≤ k̂`, `δ₀` beyond.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalBayesPosterior {
    pub k_hat: usize,
    pub tilts: Vec<CoordinateTilt>,
}

fn build_tilts(prior: &SievePrior, obs: &SequenceObservation, k: usize) -> Result<Vec<CoordinateTilt>> {
    (1..=k).map(|j| CoordinateTilt::new(prior.family(j)?, obs.y[j - 1], obs.n)).collect()
}

pub fn fit_mean_field(prior: &SievePrior, obs: &SequenceObservation) -> Result<MeanFieldSeqPosterior> {
    let log_w = log_model_weights(prior, obs)?;
    let k_tilde = argmax_first((0..log_w.len()).map(|k| log_pair_mass(&log_w, k)));
    let p_tilde = if k_tilde == 0 {
        0.0
    } else {
        (log_w[k_tilde - 1] - log_pair_mass(&log_w, k_tilde)).exp()
    };
    let tilts = build_tilts(prior, obs, k_tilde)?;
    Ok(MeanFieldSeqPosterior { k_tilde, p_tilde, tilts })
}

pub fn fit_empirical_bayes(prior: &SievePrior, obs: &SequenceObservation) -> Result<EmpiricalBayesPosterior> {
    let log_w = log_model_weights(prior, obs)?;
    let k_hat = argmax_first(log_w.iter().cloned());
    let tilts = build_tilts(prior, obs, k_hat)?;
    Ok(EmpiricalBayesPosterior { k_hat, tilts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObjectiveKind {
    /// Mean-field family: the minimum over shell `k` of `KL(Q‖Π(·|Y))`.
    Vb,
    /// Empirical-Bayes family (single shell).
    Eb,
}

/// Minimum of `KL(Q‖Π(·|Y))` over the family restricted to shell `k`, up to a
/// constant shared by both kinds: `−log(π(k−1|Y)+π(k|Y))` or `−log π(k|Y)`.
pub fn vb_objective(prior: &SievePrior, obs: &SequenceObservation, k: usize, kind: ObjectiveKind) -> Result<f64> {
    if k > prior.k_max() {
        return Err(Error::input(format!("k = {k} exceeds K_max = {}", prior.k_max())));
    }
    let log_w = log_model_weights(prior, obs)?;
    Ok(match kind {
        ObjectiveKind::Vb => -log_pair_mass(&log_w, k),
        ObjectiveKind::Eb => -log_w[k],
    })
}

impl ProductPosterior for MeanFieldSeqPosterior {
    fn coordinate_second_moment(&self, j: usize, c: f64) -> f64 {
        if j < self.k_tilde {
            self.tilts[j - 1].second_moment_about(c)
        } else if j == self.k_tilde {
            (1.0 - self.p_tilde) * self.tilts[j - 1].second_moment_about(c) + self.p_tilde * c * c
        } else {
            c * c
        }
    }

    fn sample_theta<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let mut theta = vec![0.0; len];
        let k = self.k_tilde;
        if k == 0 {
            return theta;
        }
        let keep_last = rng.random::<f64>() >= self.p_tilde;
        let upto = if keep_last { k } else { k - 1 };
        for j in 1..=upto.min(len) {
            theta[j - 1] = self.tilts[j - 1].sample(rng);
        }
        theta
    }
}

impl ProductPosterior for EmpiricalBayesPosterior {
    fn coordinate_second_moment(&self, j: usize, c: f64) -> f64 {
        if j <= self.k_hat {
            self.tilts[j - 1].second_moment_about(c)
        } else {
            c * c
        }
    }

    fn sample_theta<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let mut theta = vec![0.0; len];
        for j in 1..=self.k_hat.min(len) {
            theta[j - 1] = self.tilts[j - 1].sample(rng);
        }
        theta
    }
}

/// `E_Q ‖θ − θ*‖²` in closed form.
pub fn expected_risk<P: ProductPosterior>(post: &P, signal: &SobolevSignal, k_max: usize) -> Result<f64> {
    if signal.len() != k_max {
        return Err(Error::input(format!(
            "signal length {} differs from K_max = {k_max}",
            signal.len()
        )));
    }
    Ok(signal
        .theta()
        .iter()
        .enumerate()
        .map(|(i, &t)| post.coordinate_second_moment(i + 1, t))
        .sum())
}

/// One coordinate density of a structured candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateDensity {
    Gaussian(ScalarGaussian),
    /// Use `f̃_j` itself.
    Tilt,
}

/// Member of the structural family `p·(∏_{j<k} g_j ⊗ δ₀…) + (1−p)·(∏_{j≤k} g_j ⊗ δ₀…)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellCandidate {
    pub k: usize,
    pub p: f64,
    pub coords: Vec<CandidateDensity>,
}

/// Candidates accepted by [`posterior_kl_gap`]; only `Shell` lies in the family.
#[derive(Debug, Clone, PartialEq)]
pub enum VariationalCandidate {
    Shell(ShellCandidate),
    /// A mixture over several shells (e.g. the exact posterior); not a product measure.
    ShellMixture(Vec<(f64, ShellCandidate)>),
}

impl ShellCandidate {
    /// The candidate corresponding to a fitted mean-field posterior.
    pub fn from_fit(fit: &MeanFieldSeqPosterior) -> Self {
        Self { k: fit.k_tilde, p: fit.p_tilde, coords: vec![CandidateDensity::Tilt; fit.k_tilde] }
    }
}

fn xlogy_ratio(p: f64, log_q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p.ln() - log_q)
    }
}

fn kl_to_tilt(g: &CandidateDensity, tilt: &CoordinateTilt) -> Result<f64> {
    match g {
        CandidateDensity::Tilt => Ok(0.0),
        CandidateDensity::Gaussian(g) => {
            if g.is_point_mass() {
                return Err(Error::input("candidate coordinate must be absolutely continuous"));
            }
            if let TiltRepresentation::Gaussian(t) = &tilt.representation {
                return Ok(kl_gaussian(g, t));
            }
            let sd = g.variance.sqrt();
            let (lo, hi) = (g.mean - 12.0 * sd, g.mean + 12.0 * sd);
            let cross = quadrature::integrate(|t| g.log_pdf(t).exp() * tilt.log_density(t), lo, hi, 1e-10)?;
            let neg_entropy = -0.5 * (1.0 + LN_2PI + g.variance.ln());
            Ok(neg_entropy - cross)
        }
    }
}

/// Exact `KL(Q‖Π(·|Y))` for a candidate in the structural family:
/// `p log(p/π(k−1|Y)) + (1−p) log((1−p)/π(k|Y)) + (1−p) D(g_k‖f̃_k) + Σ_{j<k} D(g_j‖f̃_j)`.
pub fn posterior_kl_gap(prior: &SievePrior, obs: &SequenceObservation, candidate: &VariationalCandidate) -> Result<f64> {
    let cand = match candidate {
        VariationalCandidate::Shell(c) => c,
        VariationalCandidate::ShellMixture(_) => {
            return Err(Error::input("candidate is a mixture over shells, not a product measure"))
        }
    };
    if cand.k > prior.k_max() {
        return Err(Error::input(format!("shell {} exceeds K_max = {}", cand.k, prior.k_max())));
    }
    if cand.coords.len() != cand.k {
        return Err(Error::input(format!("{} coordinate densities for shell {}", cand.coords.len(), cand.k)));
    }
    if !(0.0..1.0).contains(&cand.p) {
        return Err(Error::input(format!("mixing weight p = {} outside [0, 1)", cand.p)));
    }
    let log_w = log_model_weights(prior, obs)?;
    if cand.k == 0 {
        return Ok(-log_w[0]);
    }
    let (p, k) = (cand.p, cand.k);
    let mut kl = xlogy_ratio(p, log_w[k - 1]) + xlogy_ratio(1.0 - p, log_w[k]);
    for j in 1..=k {
        let tilt = CoordinateTilt::new(prior.family(j)?, obs.y[j - 1], obs.n)?;
        let d = kl_to_tilt(&cand.coords[j - 1], &tilt)?;
        kl += if j == k { (1.0 - p) * d } else { d };
    }
    Ok(kl)
}
