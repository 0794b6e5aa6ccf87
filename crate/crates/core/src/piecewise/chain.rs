use serde::Serialize;

use super::prior::{ChangePointPrior, SiteDensity};
use super::signal::PiecewiseSignal;
use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-10;

/// One step of a chain on a `G`-point grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transition {
    /// Row-major `G × G` matrix.
    Dense { probs: Vec<f64> },
    /// Row `a` is `stay[a] δ_a + (1 − stay[a]) jump`.
    StayOrJump { stay: Vec<f64>, jump: Vec<f64> },
}

impl Transition {
    pub fn prob(&self, a: usize, b: usize) -> f64 {
        match self {
            Transition::Dense { probs } => {
                let g = (probs.len() as f64).sqrt() as usize;
                probs[a * g + b]
            }
            Transition::StayOrJump { stay, jump } => {
                let base = (1.0 - stay[a]) * jump[b];
                if a == b {
                    stay[a] + base
                } else {
                    base
                }
            }
        }
    }

    /// `m ↦ mᵀ T`.
    pub fn propagate(&self, m: &[f64]) -> Vec<f64> {
        let g = m.len();
        match self {
            Transition::Dense { probs } => {
                let mut out = vec![0.0; g];
                for (a, &ma) in m.iter().enumerate() {
                    if ma != 0.0 {
                        for (o, p) in out.iter_mut().zip(&probs[a * g..(a + 1) * g]) {
                            *o += ma * p;
                        }
                    }
                }
                out
            }
            Transition::StayOrJump { stay, jump } => {
                let moving: f64 = m.iter().zip(stay).map(|(ma, s)| ma * (1.0 - s)).sum();
                (0..g).map(|b| m[b] * stay[b] + moving * jump[b]).collect()
            }
        }
    }

    fn validate(&self, g: usize) -> Result<()> {
        let bad = |x: f64| !(x.is_finite() && (-ROW_TOL..=1.0 + ROW_TOL).contains(&x));
        match self {
            Transition::Dense { probs } => {
                if probs.len() != g * g {
                    return Err(Error::input(format!("dense transition has {} entries for G = {g}", probs.len())));
                }
                if probs.iter().any(|&x| bad(x)) {
                    return Err(Error::input("transition entries must lie in [0, 1]"));
                }
                for row in probs.chunks(g) {
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > ROW_TOL {
                        return Err(Error::input(format!("transition row sums to {s}")));
                    }
                }
            }
            Transition::StayOrJump { stay, jump } => {
                if stay.len() != g || jump.len() != g {
                    return Err(Error::input("stay/jump vectors must have length G"));
                }
                if stay.iter().chain(jump).any(|&x| bad(x)) {
                    return Err(Error::input("stay/jump entries must lie in [0, 1]"));
                }
                let s: f64 = jump.iter().sum();
                if (s - 1.0).abs() > ROW_TOL {
                    return Err(Error::input(format!("jump distribution sums to {s}")));
                }
            }
        }
        Ok(())
    }
}

/// A first-order Markov chain over a fixed grid, with its single-site marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridChain {
    grid: Vec<f64>,
    initial: Vec<f64>,
    transitions: Vec<Transition>,
    marginals: Vec<Vec<f64>>,
}

impl GridChain {
    pub fn new(grid: Vec<f64>, initial: Vec<f64>, transitions: Vec<Transition>) -> Result<Self> {
        let g = grid.len();
        if g < 2 {
            return Err(Error::input("grid needs at least two points"));
        }
        if initial.len() != g {
            return Err(Error::input(format!("initial distribution has length {} for G = {g}", initial.len())));
        }
        let s: f64 = initial.iter().sum();
        if (s - 1.0).abs() > ROW_TOL || initial.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::input(format!("initial distribution sums to {s}")));
        }
        for t in &transitions {
            t.validate(g)?;
        }
        let mut marginals = Vec::with_capacity(transitions.len() + 1);
        marginals.push(initial.clone());
        for t in &transitions {
            let next = t.propagate(marginals.last().unwrap());
            marginals.push(next);
        }
        Ok(Self { grid, initial, transitions, marginals })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    /// Joint law of `(θ_i, θ_{i+1})`, row-major `G × G`, `i` 0-based.
    pub fn pairwise(&self, i: usize) -> Result<Vec<f64>> {
        let t = self
            .transitions
            .get(i)
            .ok_or_else(|| Error::input(format!("no transition after site {i}")))?;
        let g = self.grid.len();
        let mut out = vec![0.0; g * g];
        for a in 0..g {
            for b in 0..g {
                out[a * g + b] = self.marginals[i][a] * t.prob(a, b);
            }
        }
        Ok(out)
    }

    /// `Σ_i Σ_g m_i(g) (grid_g − θ*_i)²`.
    pub fn risk(&self, signal: &PiecewiseSignal) -> Result<f64> {
        if signal.len() != self.len() {
            return Err(Error::input(format!("chain has {} sites, signal has {}", self.len(), signal.len())));
        }
        Ok(self
            .marginals
            .iter()
            .zip(signal.values())
            .map(|(m, &t)| m.iter().zip(&self.grid).map(|(p, x)| p * (x - t).powi(2)).sum::<f64>())
            .sum())
    }

    /// Posterior mean at each site.
    pub fn means(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.iter().zip(&self.grid).map(|(p, x)| p * x).sum()).collect()
    }
}

/// `G` equally spaced points on `[−B−1−4σ, B+1+4σ]`.
pub fn default_grid(bound: f64, sigma: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::input("grid needs at least two points"));
    }
    if !(bound > 0.0 && sigma > 0.0) {
        return Err(Error::domain("bound and sigma must be positive"));
    }
    let half = bound + 1.0 + 4.0 * sigma;
    let step = 2.0 * half / (points - 1) as f64;
    Ok((0..points).map(|i| -half + i as f64 * step).collect())
}

/// Nearest grid point to `x` among those no farther from zero than `x`, so a
/// snapped signal stays inside the same sup-norm ball. Falls back to the nearest point.
pub fn snap_to_grid(grid: &[f64], x: f64) -> f64 {
    let nearest = |it: &mut dyn Iterator<Item = &f64>| {
        it.min_by(|a, b| (*a - x).abs().total_cmp(&(*b - x).abs())).copied()
    };
    nearest(&mut grid.iter().filter(|g| g.abs() <= x.abs()))
        .or_else(|| nearest(&mut grid.iter()))
        .expect("non-empty grid")
}

pub(crate) fn check_problem(x: &[f64], sigma: f64, g: &SiteDensity, grid: &[f64]) -> Result<()> {
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("observations must be non-empty and finite"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("grid must have at least two strictly increasing points"));
    }
    if let SiteDensity::Uniform { lo, hi } = *g {
        if grid[0] > lo || grid[grid.len() - 1] < hi {
            return Err(Error::input(format!("grid does not cover the prior support [{lo}, {hi}]")));
        }
    }
    Ok(())
}

/// Per-site likelihoods `exp(−(x_i − grid_b)²/2σ²)`, each rescaled to have maximum 1.
pub(crate) fn scaled_emissions(x: &[f64], sigma: f64, grid: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|&xi| {
            let logs: Vec<f64> = grid.iter().map(|&g| -(xi - g).powi(2) / (2.0 * sigma * sigma)).collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            logs.into_iter().map(|l| (l - max).exp()).collect()
        })
        .collect()
}

/// Exact posterior of the grid-discretized model under a Markov prior, by a
/// rescaled backward pass followed by forward propagation. `O(nG)`.
pub fn grid_posterior(x: &[f64], sigma: f64, prior: &ChangePointPrior, grid: &[f64]) -> Result<GridChain> {
    let ChangePointPrior::MarkovPrior { p, g } = prior else {
        return Err(Error::input("grid_posterior requires a Markov prior"));
    };
    check_problem(x, sigma, g, grid)?;
    let gw = g.grid_weights(grid)?;
    let e = scaled_emissions(x, sigma, grid);
    let n = x.len();
    let size = grid.len();
    let mut beta = vec![1.0; size];
    let mut transitions = Vec::with_capacity(n.saturating_sub(1));
    for i in (0..n.saturating_sub(1)).rev() {
        let w: Vec<f64> = e[i + 1].iter().zip(&beta).map(|(a, b)| a * b).collect();
        let s: f64 = gw.iter().zip(&w).map(|(a, b)| a * b).sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::numeric(format!("backward pass underflowed at site {i}")));
        }
        let raw: Vec<f64> = w.iter().map(|wa| (1.0 - p) * wa + p * s).collect();
        let stay = w.iter().zip(&raw).map(|(wa, r)| (1.0 - p) * wa / r).collect();
        let jump = gw.iter().zip(&w).map(|(ga, wa)| ga * wa / s).collect();
        transitions.push(Transition::StayOrJump { stay, jump });
        let max = raw.iter().cloned().fold(0.0, f64::max);
        beta = raw.into_iter().map(|r| r / max).collect();
    }
    transitions.reverse();
    let init_raw: Vec<f64> = (0..size).map(|b| gw[b] * e[0][b] * beta[b]).collect();
    let z: f64 = init_raw.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::numeric("initial posterior has no mass"));
    }
    GridChain::new(grid.to_vec(), init_raw.into_iter().map(|v| v / z).collect(), transitions)
}
