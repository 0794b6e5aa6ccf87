use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    ExperimentConfig, GsmMetric, GsmPosteriorKind, GsmPriorSpec, GsmSignalSpec, ModelSpec, PiecewiseMethod,
    TruncSignalSpec,
};
use super::table::{RateRow, RateTable};
use crate::divergence::{chain_report, renyi_monotonicity_check, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::expfam::{fit_gaussian_mf, hellinger_numeric, FourierDensity};
use crate::gsm::{
    expected_risk, fit_empirical_bayes, fit_mean_field, make_signal, sample_observation, CoordinateFamily,
    SievePrior, SignalKind, SobolevSignal,
};
use crate::mixture::{hellinger_to_truth, mixture_pdf, select_k, uniform_grid, MixtureModel};
use crate::numeric::mean_and_stderr;
use crate::numeric::seed::{derive_seed, rng_from_seed, splitmix64};
use crate::piecewise::{
    default_grid, fit_markov_vb, grid_posterior, snap_to_grid, ChangePointPrior, PiecewiseSignal, SiteDensity,
};
use crate::trunc_gauss::{ceil_robust, exact_risk, rate_exponent_curve, worst_case_risk, CurvePoint};

/// Runs every `(n, replication)` pair concurrently and averages per `n`.
///
/// Replication `r` at size `n` uses the seed `derive_seed(master_seed, n, r)`, so
/// the table does not depend on scheduling. Exact models (`trunc_gauss`) report
/// one evaluation per `n` with zero standard error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RateTable> {
    cfg.validate()?;
    match &cfg.model {
        ModelSpec::TruncGauss { alpha, beta, radius, t, signal } => {
            let rows = cfg
                .n_grid
                .par_iter()
                .map(|&n| {
                    let nu = n as usize;
                    let k = ceil_robust((n as f64).powf(*t)).clamp(1, nu);
                    let risk = match signal {
                        TruncSignalSpec::WorstCase => worst_case_risk(*alpha, *beta, *radius, nu, k),
                        TruncSignalSpec::Boundary => make_signal(SignalKind::SobolevBoundary, *alpha, *radius, nu)
                            .and_then(|s| exact_risk(&s, n as f64, *beta, k)),
                    }
                    .map_err(|e| wrap(n, 0, e))?;
                    Ok(RateRow { n, mean_risk: risk, stderr: 0.0, replications: 1 })
                })
                .collect::<Vec<Result<RateRow>>>();
            RateTable::new(rows.into_iter().collect::<Result<Vec<_>>>()?)
        }
        ModelSpec::TruncCurve { .. } => Err(Error::Config("trunc_curve produces a curve; use run_curve".into())),
        ModelSpec::Divergence { .. } => Err(Error::Config("divergence produces a summary; use run_divcheck".into())),
        model => replicate(cfg, |n, seed| replication(model, cfg, n, seed)),
    }
}

fn wrap(n: u64, rep: usize, e: Error) -> Error {
    Error::Replication { n, rep, source: Box::new(e) }
}

fn replicate<F>(cfg: &ExperimentConfig, f: F) -> Result<RateTable>
where
    F: Fn(u64, u64) -> Result<f64> + Sync,
{
    let jobs: Vec<(u64, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let values: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            f(n, derive_seed(cfg.master_seed, n, r as u64))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::numeric(format!("non-finite risk {v}")))
                    }
                })
                .map_err(|e| wrap(n, r, e))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let rows = cfg
        .n_grid
        .iter()
        .zip(values.chunks(cfg.replications))
        .map(|(&n, chunk)| {
            let (mean_risk, stderr) = mean_and_stderr(chunk);
            RateRow { n, mean_risk, stderr, replications: chunk.len() }
        })
        .collect();
    RateTable::new(rows)
}

fn replication(model: &ModelSpec, cfg: &ExperimentConfig, n: u64, seed: u64) -> Result<f64> {
    match model {
        ModelSpec::Gsm { alpha, radius, prior, signal, posterior, metric, k_max } => {
            let n_max = *cfg.n_grid.last().expect("validated non-empty") as f64;
            let k_max = k_max.unwrap_or_else(|| ceil_robust(4.0 * n_max.powf(1.0 / (2.0 * alpha + 1.0))));
            gsm_replication(*alpha, *radius, *prior, *signal, *posterior, *metric, k_max, n as f64, seed)
        }
        ModelSpec::Piecewise { sigma, bound, k_star, method, grid_points, levels } => {
            let grid = default_grid(*bound, *sigma, *grid_points)?;
            let signal = piecewise_signal(n as usize, *bound, *k_star, levels.as_deref(), &grid)?;
            piecewise_replication(&signal, *sigma, *method, &grid, seed)
        }
        ModelSpec::Mixture { means, weights, sigma, k_candidates, hyper } => {
            let truth = MixtureModel::new(means.clone(), weights.clone(), *sigma, 2)?;
            let data = truth.sample(n as usize, seed);
            let (_, state) = select_k(&data, k_candidates, hyper, splitmix64(seed))?;
            let fit = state.plug_in();
            let grid = mixture_grid(&[&truth, &fit]);
            hellinger_to_truth(&state, &|x| mixture_pdf(&truth, x), &grid)
        }
        ModelSpec::Expfam { theta_star, k, prior_variance, options } => {
            let truth = FourierDensity::new(theta_star.clone())?;
            let data = truth.sample(n as usize, seed);
            let prior = SievePrior::geometric(*k, 1.0, CoordinateFamily::Gaussian { variance: *prior_variance })?;
            let mut opts = *options;
            opts.seed = splitmix64(seed ^ options.seed);
            let fit = fit_gaussian_mf(&data, &prior, *k, &opts)?;
            Ok(hellinger_numeric(theta_star, &fit.q.mu)?.powi(2))
        }
        ModelSpec::TruncGauss { .. } | ModelSpec::TruncCurve { .. } | ModelSpec::Divergence { .. } => {
            unreachable!("handled by run_experiment")
        }
    }
}

/// Signal for one GSM replication at noise level `n`.
pub fn gsm_signal(spec: GsmSignalSpec, alpha: f64, radius: f64, k_max: usize, n: f64) -> Result<SobolevSignal> {
    let kind = match spec {
        GsmSignalSpec::Zero => SignalKind::Zero,
        GsmSignalSpec::Spike { j0 } => SignalKind::Spike { j0 },
        GsmSignalSpec::SobolevBoundary => SignalKind::SobolevBoundary,
        GsmSignalSpec::LowerBoundSpike => SignalKind::Spike { j0: lower_bound_index(alpha, n) },
    };
    make_signal(kind, alpha, radius, k_max)
}

/// `⌈2 (n / log n)^{1/(2α+1)}⌉`.
pub fn lower_bound_index(alpha: f64, n: f64) -> usize {
    ceil_robust(2.0 * (n / n.ln()).powf(1.0 / (2.0 * alpha + 1.0)))
}

pub fn gsm_prior(spec: GsmPriorSpec, k_max: usize, n: f64) -> Result<SievePrior> {
    match spec {
        GsmPriorSpec::Gaussian { variance, tau } => {
            SievePrior::geometric(k_max, tau, CoordinateFamily::Gaussian { variance })
        }
        GsmPriorSpec::RescaledCauchy { scale, tau } => {
            SievePrior::geometric(k_max, tau, CoordinateFamily::RescaledCauchy { scale, noise_level: n })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gsm_replication(
    alpha: f64,
    radius: f64,
    prior: GsmPriorSpec,
    signal: GsmSignalSpec,
    posterior: GsmPosteriorKind,
    metric: GsmMetric,
    k_max: usize,
    n: f64,
    seed: u64,
) -> Result<f64> {
    let signal = gsm_signal(signal, alpha, radius, k_max, n)?;
    let prior = gsm_prior(prior, k_max, n)?;
    let obs = sample_observation(&signal, n, seed)?;
    match posterior {
        GsmPosteriorKind::MeanField => {
            let fit = fit_mean_field(&prior, &obs)?;
            match metric {
                GsmMetric::Risk => expected_risk(&fit, &signal, k_max),
                GsmMetric::Dimension => Ok(fit.k_tilde as f64),
            }
        }
        GsmPosteriorKind::EmpiricalBayes => {
            let fit = fit_empirical_bayes(&prior, &obs)?;
            match metric {
                GsmMetric::Risk => expected_risk(&fit, &signal, k_max),
                GsmMetric::Dimension => Ok(fit.k_hat as f64),
            }
        }
    }
}

/// Evenly spaced signal with `k_star` pieces. Without explicit levels the pieces
/// alternate between `−B` and `B`, each snapped to `grid`.
pub fn piecewise_signal(n: usize, bound: f64, k_star: usize, levels: Option<&[f64]>, grid: &[f64]) -> Result<PiecewiseSignal> {
    let levels: Vec<f64> = match levels {
        Some(l) => l.to_vec(),
        None => {
            let (lo, hi) = (snap_to_grid(grid, -bound), snap_to_grid(grid, bound));
            (0..k_star).map(|i| if i % 2 == 0 { lo } else { hi }).collect()
        }
    };
    PiecewiseSignal::evenly_spaced(n, &levels, bound)
}

/// Posterior risk `E_Q‖θ − θ*‖²` of one fit on data drawn with `seed`.
pub fn piecewise_replication(
    signal: &PiecewiseSignal,
    sigma: f64,
    method: PiecewiseMethod,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    let n = signal.len();
    let x = signal.observe(sigma, seed)?;
    let g = SiteDensity::uniform_for_bound(signal.bound());
    match method {
        PiecewiseMethod::MeanField => {
            let prior = ChangePointPrior::markov(n, 1.0, g)?;
            crate::piecewise::fit_mean_field(&x, sigma, &prior)?.risk(signal)
        }
        PiecewiseMethod::Markov { c } => {
            let prior = ChangePointPrior::markov(n, c, g)?;
            grid_posterior(&x, sigma, &prior, grid)?.risk(signal)
        }
        PiecewiseMethod::GeometricCavi => {
            let prior = ChangePointPrior::geometric_pieces(n, g)?;
            fit_markov_vb(&x, sigma, &prior, grid)?.chain.risk(signal)
        }
    }
}

/// Grid wide enough to hold every component of every model, 8001 points.
fn mixture_grid(models: &[&MixtureModel]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m in models {
        let sd = m.sigma / std::f64::consts::SQRT_2;
        for &mu in &m.mu {
            lo = lo.min(mu - 12.0 * sd);
            hi = hi.max(mu + 12.0 * sd);
        }
    }
    uniform_grid(lo, hi, 8001)
}

/// Exponent curve of the truncated-Gaussian VB risk for a `trunc_curve` config.
pub fn run_curve(cfg: &ExperimentConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    match &cfg.model {
        ModelSpec::TruncCurve { alpha, beta, t_grid } => {
            let n_grid: Vec<usize> = cfg.n_grid.iter().map(|&n| n as usize).collect();
            let points = t_grid
                .par_iter()
                .map(|&t| rate_exponent_curve(*alpha, *beta, &[t], &n_grid).map(|mut v| v.remove(0)))
                .collect::<Vec<Result<CurvePoint>>>();
            points.into_iter().collect()
        }
        _ => Err(Error::Config("run_curve needs a trunc_curve model".into())),
    }
}

/// Result of the divergence-chain check on random pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivcheckSummary {
    pub pairs: usize,
    pub chain_violations: usize,
    pub monotonicity_violations: usize,
    /// Largest amount by which a link of the chain was broken (0 when none was).
    pub max_violation: f64,
}

const CHAIN_SLACK: f64 = 1e-10;
const RHO_GRID: [f64; 10] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 1.1, 1.5, 2.0, 4.0];

/// Dirichlet(1) draw of the given size via normalized exponentials.
fn flat_dirichlet<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Result<DiscreteDistribution> {
    let w: Vec<f64> = (0..size).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    DiscreteDistribution::from_weights(&w)
}

/// Checks `TV² ≤ 2H² ≤ D_{1/2} ≤ KL ≤ D₂ ≤ χ²` and monotonicity of `D_ρ` in `ρ`
/// on `pairs` random pairs with sizes drawn uniformly from `min_size..=max_size`.
pub fn run_divcheck(cfg: &ExperimentConfig) -> Result<DivcheckSummary> {
    cfg.validate()?;
    let ModelSpec::Divergence { pairs, min_size, max_size } = cfg.model else {
        return Err(Error::Config("run_divcheck needs a divergence model".into()));
    };
    let results = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(cfg.master_seed, 0, i as u64));
            let size = rng.random_range(min_size..=max_size);
            let p = flat_dirichlet(&mut rng, size)?;
            let q = flat_dirichlet(&mut rng, size)?;
            let report = chain_report(&p, &q)?;
            let monotone = renyi_monotonicity_check(&p, &q, &RHO_GRID)?;
            Ok((report.is_ordered(CHAIN_SLACK), report.max_violation(), monotone))
        })
        .collect::<Vec<Result<(bool, f64, bool)>>>();
    let mut summary = DivcheckSummary { pairs, chain_violations: 0, monotonicity_violations: 0, max_violation: 0.0 };
    for r in results {
        let (ordered, violation, monotone) = r?;
        summary.chain_violations += usize::from(!ordered);
        summary.monotonicity_violations += usize::from(!monotone);
        summary.max_violation = summary.max_violation.max(violation);
    }
    Ok(summary)
}

/// One row of a multi-series table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub n: u64,
    pub mean_risk: f64,
    pub stderr: f64,
    pub replications: usize,
}

fn method_name(m: PiecewiseMethod) -> &'static str {
    match m {
        PiecewiseMethod::MeanField => "mean_field",
        PiecewiseMethod::Markov { .. } => "markov",
        PiecewiseMethod::GeometricCavi => "geometric_cavi",
    }
}

/// Mean-field risk next to the configured chain method (Markov with `c = 1` when
/// the config itself asks for mean field). Both series see the same data.
pub fn run_pc_compare(cfg: &ExperimentConfig) -> Result<Vec<SeriesRow>> {
    let ModelSpec::Piecewise { method, .. } = &cfg.model else {
        return Err(Error::Config("pc-compare needs a piecewise model".into()));
    };
    let chain = match method {
        PiecewiseMethod::MeanField => PiecewiseMethod::Markov { c: 1.0 },
        m => *m,
    };
    let mut out = Vec::new();
    for m in [PiecewiseMethod::MeanField, chain] {
        let mut c = cfg.clone();
        if let ModelSpec::Piecewise { method, .. } = &mut c.model {
            *method = m;
        }
        let table = run_experiment(&c)?;
        out.extend(table.rows.into_iter().map(|r| SeriesRow {
            series: method_name(m).to_string(),
            n: r.n,
            mean_risk: r.mean_risk,
            stderr: r.stderr,
            replications: r.replications,
        }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn replicated_runs_are_deterministic() {
        let c = cfg(r#"{"model": {"kind": "gsm", "alpha": 1, "radius": 2,
            "prior": {"kind": "gaussian", "variance": 1, "tau": 1}, "signal": {"kind": "sobolev_boundary"}},
            "n_grid": [64, 128, 256], "replications": 1, "master_seed": 11}"#);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3);
    }

    #[test]
    fn exact_model_rows_have_zero_stderr() {
        let c = cfg(r#"{"model": {"kind": "trunc_gauss", "alpha": 2, "beta": 1, "radius": 1, "t": 0.2},
            "n_grid": [64, 128, 256]}"#);
        let t = run_experiment(&c).unwrap();
        assert!(t.rows.iter().all(|r| r.stderr == 0.0 && r.mean_risk > 0.0));
        assert!(t.rows.windows(2).all(|w| w[0].n < w[1].n));
    }

    #[test]
    fn replication_errors_carry_context() {
        let c = cfg(r#"{"model": {"kind": "gsm", "alpha": 1, "radius": 2,
            "prior": {"kind": "gaussian", "variance": 1, "tau": 1}, "signal": {"kind": "spike", "j0": 50}, "k_max": 10},
            "n_grid": [64, 128, 256], "replications": 2}"#);
        match run_experiment(&c).unwrap_err() {
            Error::Replication { n, rep, source } => {
                assert_eq!((n, rep), (64, 0));
                assert!(source.is_validation());
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn divcheck_small_run_is_clean() {
        let c = cfg(r#"{"model": {"kind": "divergence", "pairs": 500, "min_size": 2, "max_size": 64}}"#);
        let s = run_divcheck(&c).unwrap();
        assert_eq!(s.pairs, 500);
        assert_eq!(s.chain_violations, 0);
        assert_eq!(s.monotonicity_violations, 0);
    }

    #[test]
    fn lower_bound_spike_position() {
        assert_eq!(lower_bound_index(1.0, 4096.0), 16);
    }

    #[test]
    fn pc_compare_has_two_series() {
        let c = cfg(r#"{"model": {"kind": "piecewise", "sigma": 1, "bound": 1, "k_star": 2,
            "method": {"kind": "mean_field"}, "grid_points": 16}, "n_grid": [16, 32, 64], "replications": 2}"#);
        let rows = run_pc_compare(&c).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].series, "mean_field");
        assert_eq!(rows[5].series, "markov");
    }
}
