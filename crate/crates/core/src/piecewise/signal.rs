use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::seed::rng_from_seed;

/// A piecewise-constant sequence with `k_star` pieces and sup-norm at most `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSignal {
    values: Vec<f64>,
    k_star: usize,
    bound: f64,
}

impl PiecewiseSignal {
    pub fn new(values: Vec<f64>, bound: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("empty signal"));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::domain(format!("bound must be positive, got {bound}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= bound)) {
            return Err(Error::domain(format!("value {v} exceeds bound {bound}")));
        }
        let k_star = 1 + values.windows(2).filter(|w| w[0] != w[1]).count();
        Ok(Self { values, k_star, bound })
    }

    /// `n` sites split into `levels.len()` pieces of (nearly) equal length.
    pub fn evenly_spaced(n: usize, levels: &[f64], bound: f64) -> Result<Self> {
        if levels.is_empty() || levels.len() > n {
            return Err(Error::input(format!("{} pieces for {n} sites", levels.len())));
        }
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("adjacent levels must differ"));
        }
        let m = levels.len();
        let values = (0..n).map(|i| levels[i * m / n]).collect();
        Self::new(values, bound)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `X_i = θ_i + σ Z_i`.
    pub fn observe(&self, sigma: f64, seed: u64) -> Result<Vec<f64>> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        let mut rng = rng_from_seed(seed);
        Ok(self
            .values
            .iter()
            .map(|t| {
                let z: f64 = rng.sample(StandardNormal);
                t + sigma * z
            })
            .collect())
    }
}

/// Least-squares fit with at most `m` constant pieces by dynamic programming.
/// Returns the fitted sequence and its residual sum of squares.
pub fn mle_segmentation(x: &[f64], m: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    if m == 0 || m > n {
        return Err(Error::input(format!("piece count {m} outside 1..={n}")));
    }
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    // SSE of x[a..b] around its mean.
    let cost = |a: usize, b: usize| {
        let len = (b - a) as f64;
        let s = s1[b] - s1[a];
        (s2[b] - s2[a] - s * s / len).max(0.0)
    };
    // best[p][e]: minimal SSE of x[..e] with exactly p pieces; back[p][e]: start of the last piece.
    let mut best = vec![vec![f64::INFINITY; n + 1]; m + 1];
    let mut back = vec![vec![0usize; n + 1]; m + 1];
    best[0][0] = 0.0;
    for p in 1..=m {
        for e in p..=n {
            for s in (p - 1)..e {
                let v = best[p - 1][s] + cost(s, e);
                if v < best[p][e] {
                    best[p][e] = v;
                    back[p][e] = s;
                }
            }
        }
    }
    let pieces = (1..=m).min_by(|&a, &b| best[a][n].total_cmp(&best[b][n])).unwrap();
    let mut theta = vec![0.0; n];
    let mut e = n;
    for p in (1..=pieces).rev() {
        let s = back[p][e];
        let mean = (s1[e] - s1[s]) / (e - s) as f64;
        theta[s..e].iter_mut().for_each(|t| *t = mean);
        e = s;
    }
    Ok((theta, best[pieces][n]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_pieces() {
        let s = PiecewiseSignal::new(vec![0.0, 0.0, 1.0, 1.0, -1.0], 1.0).unwrap();
        assert_eq!(s.k_star(), 3);
        assert!(PiecewiseSignal::new(vec![2.0], 1.0).is_err());
        let e = PiecewiseSignal::evenly_spaced(10, &[-1.0, 1.0, 0.5, -0.5], 1.0).unwrap();
        assert_eq!(e.k_star(), 4);
    }

    #[test]
    fn segmentation_examples() {
        let x = [1.0, 1.0, 5.0, 5.0];
        let (t, sse) = mle_segmentation(&x, 2).unwrap();
        assert_eq!(t, vec![1.0, 1.0, 5.0, 5.0]);
        assert_eq!(sse, 0.0);
        let (t, sse) = mle_segmentation(&x, 1).unwrap();
        assert_eq!(t, vec![3.0; 4]);
        assert!((sse - 16.0).abs() < 1e-12);
        assert!(mle_segmentation(&x, 0).is_err());
        assert!(mle_segmentation(&x, 5).is_err());
    }

    fn brute_force_three(x: &[f64]) -> f64 {
        let n = x.len();
        let sse = |a: usize, b: usize| {
            let m = x[a..b].iter().sum::<f64>() / (b - a) as f64;
            x[a..b].iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        let mut best = sse(0, n);
        for i in 1..n {
            best = best.min(sse(0, i) + sse(i, n));
            for j in (i + 1)..n {
                best = best.min(sse(0, i) + sse(i, j) + sse(j, n));
            }
        }
        best
    }

    #[test]
    fn segmentation_matches_brute_force() {
        for seed in 0..20 {
            let s = PiecewiseSignal::evenly_spaced(12, &[0.0, 1.0, -0.5], 1.0).unwrap();
            let x = s.observe(0.7, seed).unwrap();
            let (theta, sse) = mle_segmentation(&x, 3).unwrap();
            assert!((sse - brute_force_three(&x)).abs() < 1e-10);
            let pieces = 1 + theta.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(pieces <= 3);
            let direct: f64 = theta.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            assert!((direct - sse).abs() < 1e-10);
        }
    }
}
