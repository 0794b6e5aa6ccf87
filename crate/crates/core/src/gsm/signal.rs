use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::seed::rng_from_seed;

/// A truncated sequence `θ` in the Sobolev ball `Σ j^{2α} θ_j² ≤ B²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevSignal {
    theta: Vec<f64>,
    alpha: f64,
    radius: f64,
}

/// Which constructor [`make_signal`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    Zero,
    /// All zero except `θ_{j0} = B j0^{−α}`.
    Spike { j0: usize },
    /// `θ_j ∝ j^{−α−1/2−0.01}` scaled to use 95% of the ball.
    SobolevBoundary,
}

impl SobolevSignal {
    pub fn new(theta: Vec<f64>, alpha: f64, radius: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("need alpha > 0 and B > 0, got {alpha}, {radius}")));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::input("non-finite signal entry"));
        }
        let s = Self { theta, alpha, radius };
        let ball = s.ball_sum();
        if ball > radius * radius * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "signal outside the Sobolev ball: Σ j^2α θ_j² = {ball} > B² = {}",
                radius * radius
            )));
        }
        Ok(s)
    }

    /// `Σ j^{2α} θ_j²`.
    pub fn ball_sum(&self) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(i, t)| ((i + 1) as f64).powf(2.0 * self.alpha) * t * t)
            .sum()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn norm_sq(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }
}

pub fn make_signal(kind: SignalKind, alpha: f64, radius: f64, k_max: usize) -> Result<SobolevSignal> {
    if k_max == 0 {
        return Err(Error::input("signal length must be positive"));
    }
    let mut theta = vec![0.0; k_max];
    match kind {
        SignalKind::Zero => {}
        SignalKind::Spike { j0 } => {
            if j0 == 0 || j0 > k_max {
                return Err(Error::input(format!("spike index {j0} outside 1..={k_max}")));
            }
            theta[j0 - 1] = radius * (j0 as f64).powf(-alpha);
        }
        SignalKind::SobolevBoundary => {
            let decay = -alpha - 0.5 - 0.01;
            for (i, t) in theta.iter_mut().enumerate() {
                *t = ((i + 1) as f64).powf(decay);
            }
            let raw: f64 = theta
                .iter()
                .enumerate()
                .map(|(i, t)| ((i + 1) as f64).powf(2.0 * alpha) * t * t)
                .sum();
            let c = (0.95 * radius * radius / raw).sqrt();
            theta.iter_mut().for_each(|t| *t *= c);
        }
    }
    SobolevSignal::new(theta, alpha, radius)
}

/// Observed sequence `Y_j = θ_j + Z_j / √n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceObservation {
    pub y: Vec<f64>,
    pub n: f64,
}

impl SequenceObservation {
    pub fn new(y: Vec<f64>, n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain(format!("noise level n must be positive, got {n}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite observation"));
        }
        Ok(Self { y, n })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Draws `Y_j = θ_j + Z_j/√n` from a ChaCha stream seeded with `seed`.
pub fn sample_observation(signal: &SobolevSignal, n: f64, seed: u64) -> Result<SequenceObservation> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("noise level n must be positive, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let sd = n.sqrt().recip();
    let y = signal
        .theta()
        .iter()
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            t + sd * z
        })
        .collect();
    SequenceObservation::new(y, n)
}
