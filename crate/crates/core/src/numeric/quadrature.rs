//! Gauss–Legendre rules and composite integration with panel doubling.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of an `order`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = (order + 1) / 2;
        for i in 0..m {
            // Chebyshev-like initial guess, then Newton on P_order.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over [a, b] split into `panels` equal panels.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * s;
        }
        total
    }

    /// Absolute nodes and weights for the composite rule on [a, b].
    pub fn composite_nodes(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.nodes.len());
        let mut ws = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The 20-point rule used by the adaptive drivers.
pub fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

const MAX_PANELS: usize = 1 << 14;

/// Composite 20-point Gauss–Legendre with panel doubling until two successive
/// estimates agree to `rel_tol` (relative, with an absolute floor of `rel_tol * 1e-300`).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::input(format!("bad integration interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let rule = gl20();
    let mut panels = 1;
    let mut prev = rule.composite(&mut f, a, b, panels);
    loop {
        panels *= 2;
        let cur = rule.composite(&mut f, a, b, panels);
        if !cur.is_finite() {
            return Err(Error::numeric("non-finite integrand"));
        }
        if (cur - prev).abs() <= rel_tol * cur.abs() || (cur == 0.0 && prev == 0.0) {
            return Ok(cur);
        }
        if panels >= MAX_PANELS {
            return Err(Error::numeric(format!(
                "quadrature on [{a}, {b}] did not converge: last two estimates {prev} and {cur}"
            )));
        }
        prev = cur;
    }
}

/// Returns `log ∫_a^b exp(log_f(x)) dx`, evaluated with a log-sum-exp over the
/// composite nodes so that integrands far below `f64::MIN_POSITIVE` are handled.
pub fn integrate_log<F: FnMut(f64) -> f64>(mut log_f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::input(format!("bad integration interval [{a}, {b}]")));
    }
    let rule = gl20();
    let eval = |panels: usize, log_f: &mut F| -> f64 {
        let (xs, ws) = rule.composite_nodes(a, b, panels);
        let terms: Vec<f64> = xs.iter().zip(&ws).map(|(&x, &w)| w.ln() + log_f(x)).collect();
        super::log_sum_exp(&terms)
    };
    let mut panels = 1;
    let mut prev = eval(panels, &mut log_f);
    loop {
        panels *= 2;
        let cur = eval(panels, &mut log_f);
        if cur.is_nan() {
            return Err(Error::numeric("NaN in log-integrand"));
        }
        // Relative accuracy of the integral translates to absolute accuracy of its log.
        if cur == f64::NEG_INFINITY && prev == f64::NEG_INFINITY {
            return Ok(cur);
        }
        if (cur - prev).abs() <= rel_tol {
            return Ok(cur);
        }
        if panels >= MAX_PANELS {
            return Err(Error::numeric(format!(
                "log-quadrature on [{a}, {b}] did not converge: {prev} vs {cur}"
            )));
        }
        prev = cur;
    }
}

/// Trapezoid rule over a sampled grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}
