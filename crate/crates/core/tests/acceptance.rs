//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Exits non-zero when a criterion
//! fails that is not listed in `KNOWN_FAILURES`, or when a listed one starts passing.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use vblab::divergence::ScalarGaussian;
use vblab::expfam::{
    d2_numeric, fit_gaussian_mf, hellinger_numeric, kl_numeric, log_normalizer, ElboProblem, FourierDensity,
    GaussMFVariational, MfOptions,
};
use vblab::gsm::{make_signal, CoordinateFamily, SievePrior, SignalKind, SobolevSignal};
use vblab::harness::{fit_rate_exponent, run_divcheck, run_experiment, ExperimentConfig, RateTable};
use vblab::mixture::{cavi_fixed_k, hellinger_to_truth, mixture_pdf, select_k, uniform_grid, MixtureHyper, MixtureModel};
use vblab::numeric::quadrature::integrate;
use vblab::numeric::regression::least_squares;
use vblab::numeric::seed::{derive_seed, rng_from_seed};
use vblab::numeric::{log_sum_exp, median};
use vblab::piecewise::{default_grid, grid_posterior, ChangePointPrior, SiteDensity};
use vblab::trunc_gauss::{exact_risk, monte_carlo_risk, rate_exponent_curve, theory_exponent, worst_case_risk};

use rand::Rng;

/// Criteria expected to fail, with the reason recorded in the README.
const KNOWN_FAILURES: &[u32] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cfg(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).expect("acceptance config")
}

fn pow2(lo: u32, hi: u32) -> String {
    let v: Vec<String> = (lo..=hi).map(|e| (1u64 << e).to_string()).collect();
    format!("[{}]", v.join(", "))
}

fn gsm_table(prior: &str, signal: &str, metric: &str, n_grid: &str) -> RateTable {
    run_experiment(&cfg(&format!(
        r#"{{"model": {{"kind": "gsm", "alpha": 1, "radius": 2, "prior": {prior}, "signal": {{"kind": "{signal}"}},
             "metric": "{metric}"}}, "n_grid": {n_grid}, "replications": 50, "master_seed": 20240601}}"#
    )))
    .expect("gsm experiment")
}

const GAUSSIAN_PRIOR: &str = r#"{"kind": "gaussian", "variance": 1, "tau": 1}"#;

fn c1_divergence_chain() -> Outcome {
    let t = Instant::now();
    let s = run_divcheck(&cfg(
        r#"{"model": {"kind": "divergence", "pairs": 10000, "min_size": 2, "max_size": 64}, "master_seed": 1}"#,
    ))
    .expect("divcheck");
    let el = t.elapsed();
    outcome(
        s.chain_violations == 0 && s.monotonicity_violations == 0 && el < Duration::from_secs(5),
        format!(
            "{} pairs, {} chain / {} monotonicity violations, {:.2?}",
            s.pairs, s.chain_violations, s.monotonicity_violations, el
        ),
    )
}

fn c2_gsm_rate() -> Outcome {
    let t = Instant::now();
    let table = gsm_table(GAUSSIAN_PRIOR, "sobolev_boundary", "risk", &pow2(8, 14));
    let fit = fit_rate_exponent(&table, true).expect("fit");
    let el = t.elapsed();
    let ll = fit.loglog_coefficient.unwrap();
    outcome(
        (fit.slope + 2.0 / 3.0).abs() <= 0.10 && ll > 0.0 && el < Duration::from_secs(180),
        format!("log-corrected slope {:.4} (target -0.6667 +- 0.10), log log coefficient {ll:.4}, {el:.2?}", fit.slope),
    )
}

fn c3_cauchy_rate() -> Outcome {
    let table = gsm_table(r#"{"kind": "rescaled_cauchy", "scale": 1, "tau": 1}"#, "sobolev_boundary", "risk", &pow2(8, 14));
    let fit = fit_rate_exponent(&table, false).expect("fit");
    outcome((fit.slope + 2.0 / 3.0).abs() <= 0.08, format!("slope {:.4} (target -0.6667 +- 0.08)", fit.slope))
}

fn c4_dimension() -> Outcome {
    let table = gsm_table(GAUSSIAN_PRIOR, "sobolev_boundary", "dimension", &pow2(8, 14));
    let fit = fit_rate_exponent(&table, false).expect("fit");
    outcome((fit.slope - 1.0 / 3.0).abs() <= 0.10, format!("slope {:.4} (target 0.3333 +- 0.10)", fit.slope))
}

fn c5_lower_bound() -> Outcome {
    let table = gsm_table(GAUSSIAN_PRIOR, "lower_bound_spike", "risk", "[4096]");
    let n = 4096f64;
    let threshold = 0.25 * n.powf(-2.0 / 3.0) * n.ln().powf(2.0 / 3.0);
    let risk = table.rows[0].mean_risk;
    outcome(risk > threshold, format!("mean risk {risk:.5} vs threshold {threshold:.5} at n = 4096"))
}

fn random_sobolev(rng: &mut impl Rng, len: usize) -> SobolevSignal {
    let alpha = 0.5 + 1.5 * rng.random::<f64>();
    let mut theta: Vec<f64> =
        (1..=len).map(|j| (2.0 * rng.random::<f64>() - 1.0) * (j as f64).powf(-alpha - 0.5)).collect();
    let ball: f64 = theta.iter().enumerate().map(|(i, t)| ((i + 1) as f64).powf(2.0 * alpha) * t * t).sum();
    let c = (0.9 / ball).sqrt();
    theta.iter_mut().for_each(|t| *t *= c);
    SobolevSignal::new(theta, alpha, 1.0).unwrap()
}

fn c6_trunc_gauss() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from_seed(6);
    let mut worst_z: f64 = 0.0;
    for i in 0..20 {
        let n = rng.random_range(8..=256usize);
        let k = rng.random_range(1..=n);
        let beta = 0.5 + 2.0 * rng.random::<f64>();
        let signal = random_sobolev(&mut rng, n);
        let exact = exact_risk(&signal, n as f64, beta, k).unwrap();
        let (mc, se) = monte_carlo_risk(&signal, n as f64, beta, k, 10_000, 600 + i).unwrap();
        worst_z = worst_z.max((exact - mc).abs() / se);
    }
    let n_grid: Vec<usize> = (10..=16).map(|e| 1usize << e).collect();
    let t_grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let mut worst_dev: f64 = 0.0;
    for (alpha, beta) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        for p in rate_exponent_curve(alpha, beta, &t_grid, &n_grid).unwrap() {
            worst_dev = worst_dev.max((p.fitted_exponent - theory_exponent(alpha, beta, p.t)).abs());
        }
    }
    let el = t.elapsed();
    outcome(
        worst_z <= 3.0 && worst_dev <= 0.07 && el < Duration::from_secs(60),
        format!("max |exact - MC| / se {worst_z:.2} (<= 3), max curve deviation {worst_dev:.4} (<= 0.07), {el:.2?}"),
    )
}

fn c7_variational_beats_posterior() -> Outcome {
    let mut ok = true;
    let mut ratios = Vec::new();
    for e in 10..=16 {
        let n = 1usize << e;
        let k = ((n as f64).powf(0.2) - 1e-9).ceil() as usize;
        let small = worst_case_risk(2.0, 1.0, 1.0, n, k).unwrap();
        let full = worst_case_risk(2.0, 1.0, 1.0, n, n).unwrap();
        let b = make_signal(SignalKind::SobolevBoundary, 2.0, 1.0, n).unwrap();
        ok &= small < full && exact_risk(&b, n as f64, 1.0, k).unwrap() < exact_risk(&b, n as f64, 1.0, n).unwrap();
        ratios.push(format!("{:.3}", small / full));
    }
    outcome(ok, format!("worst-case risk ratio k = n^(1/5) vs k = n: [{}]", ratios.join(", ")))
}

fn piecewise_table(method: &str, extra: &str, n_grid: &str) -> RateTable {
    run_experiment(&cfg(&format!(
        r#"{{"model": {{"kind": "piecewise", "sigma": 1, "bound": 1, {extra} "method": {method}, "grid_points": 64}},
             "n_grid": {n_grid}, "replications": 100, "master_seed": 77}}"#
    )))
    .expect("piecewise experiment")
}

fn c8_mean_field_trivial() -> Outcome {
    let table = piecewise_table(r#"{"kind": "mean_field"}"#, r#""k_star": 1, "levels": [0.0],"#, &pow2(7, 11));
    let fit = fit_rate_exponent(&table, false).unwrap();
    outcome((fit.slope - 1.0).abs() <= 0.10, format!("slope {:.4} (target 1.0 +- 0.10)", fit.slope))
}

fn c9_markov_rate() -> Outcome {
    let t = Instant::now();
    let table = piecewise_table(r#"{"kind": "markov", "c": 1}"#, r#""k_star": 4,"#, &pow2(7, 12));
    let el = t.elapsed();
    let log_n: Vec<f64> = table.rows.iter().map(|r| (r.n as f64).ln()).collect();
    let scaled: Vec<f64> = table.rows.iter().zip(&log_n).map(|(r, l)| r.mean_risk / (4.0 * l)).collect();
    let slope = least_squares(&[&log_n], &scaled).unwrap().coefficients[1];
    let loglog = fit_rate_exponent(&table, false).unwrap().slope;
    let shown: Vec<String> = scaled.iter().map(|v| format!("{v:.3}")).collect();
    outcome(
        slope.abs() <= 0.15 && el < Duration::from_secs(300),
        format!(
            "slope of risk/(k* log n) on log n {slope:.4} (target 0 +- 0.15), values [{}], log-log risk slope {loglog:.3}, {el:.2?}",
            shown.join(", ")
        ),
    )
}

fn c10_forward_backward() -> Outcome {
    let sigma = 0.8;
    let dens = SiteDensity::uniform_for_bound(1.0);
    let mut rng = rng_from_seed(10);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for (n, g) in [(2usize, 16usize), (3, 8), (4, 6), (5, 10), (6, 8), (4, 16), (3, 64)] {
        assert!(g.pow(n as u32) <= 1_000_000);
        for p in [0.3, 1e-3, 1e-12] {
            let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let prior = ChangePointPrior::markov_with_p(p, dens).unwrap();
            let grid = default_grid(1.0, 0.2, g).unwrap();
            let gw = dens.grid_weights(&grid).unwrap();
            let chain = grid_posterior(&x, sigma, &prior, &grid).unwrap();
            let total = g.pow(n as u32);
            let mut paths = Vec::with_capacity(total);
            let mut logs = Vec::with_capacity(total);
            for code in 0..total {
                let mut c = code;
                let path: Vec<usize> = (0..n)
                    .map(|_| {
                        let d = c % g;
                        c /= g;
                        d
                    })
                    .collect();
                let mut l = gw[path[0]].ln();
                for w in path.windows(2) {
                    l += ((if w[0] == w[1] { 1.0 - p } else { 0.0 }) + p * gw[w[1]]).ln();
                }
                for (xi, &s) in x.iter().zip(&path) {
                    l -= (xi - grid[s]).powi(2) / (2.0 * sigma * sigma);
                }
                logs.push(l);
                paths.push(path);
            }
            let z = log_sum_exp(&logs);
            let mut marg = vec![vec![0.0; g]; n];
            let mut pair = vec![vec![0.0; g * g]; n - 1];
            for (path, l) in paths.iter().zip(&logs) {
                let w = (l - z).exp();
                for i in 0..n {
                    marg[i][path[i]] += w;
                }
                for i in 0..n - 1 {
                    pair[i][path[i] * g + path[i + 1]] += w;
                }
            }
            for i in 0..n {
                for a in 0..g {
                    worst = worst.max((marg[i][a] - chain.marginals()[i][a]).abs());
                }
            }
            for (i, exact) in pair.iter().enumerate() {
                for (e, c) in exact.iter().zip(chain.pairwise(i).unwrap()) {
                    worst = worst.max((e - c).abs());
                }
            }
            instances += 1;
        }
    }
    outcome(worst <= 1e-10, format!("{instances} instances, max marginal/pairwise deviation {worst:.2e}"))
}

fn random_theta(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

fn c11_expfam() -> Outcome {
    let mut notes = Vec::new();
    let c0 = log_normalizer(&[0.0; 6]).unwrap();
    let mut ok = c0 == 0.0;
    let mut rng = rng_from_seed(11);
    let mut norm_err: f64 = 0.0;
    for _ in 0..20 {
        let d = FourierDensity::new(random_theta(&mut rng, 6)).unwrap();
        let total = integrate(|x| d.pdf(x).unwrap(), 0.0, 1.0, 1e-12).unwrap();
        norm_err = norm_err.max((total - 1.0).abs());
    }
    ok &= norm_err <= 1e-8;
    let mut order_fail = 0;
    for _ in 0..200 {
        let a = random_theta(&mut rng, 4);
        let b = random_theta(&mut rng, 4);
        let h = hellinger_numeric(&a, &b).unwrap();
        let kl = kl_numeric(&a, &b).unwrap();
        let d2 = d2_numeric(&a, &b).unwrap();
        let l1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        let local = l1 > std::f64::consts::FRAC_1_SQRT_2 || h <= 2.0 * std::f64::consts::SQRT_2 * l1;
        if !(2.0 * h * h <= kl + 1e-10 && kl <= d2 + 1e-10 && local) {
            order_fail += 1;
        }
    }
    ok &= order_fail == 0;

    let truth = FourierDensity::new(vec![0.8, -0.5, 0.3, 0.2]).unwrap();
    let prior = SievePrior::geometric(4, 1.0, CoordinateFamily::Gaussian { variance: 1.0 }).unwrap();
    let data = truth.sample(300, 5);
    let pb = ElboProblem::new(&data, &prior, 4, &MfOptions { seed: 17, ..MfOptions::default() }).unwrap();
    let mu = vec![0.6, -0.3, 0.2, 0.1];
    let rho = [-2.0f64, -2.5, -1.5, -2.0];
    let var = |r: &[f64]| r.iter().map(|x| (2.0 * x).exp()).collect::<Vec<_>>();
    let (gm, gr) = pb.gradient(&GaussMFVariational::new(mu.clone(), var(&rho)).unwrap()).unwrap();
    let value = |m: &[f64], r: &[f64]| pb.elbo(&GaussMFVariational::new(m.to_vec(), var(r)).unwrap()).unwrap().value;
    let h = 1e-6;
    let mut grad_err: f64 = 0.0;
    for j in 0..4 {
        let (mut up, mut dn) = (mu.clone(), mu.clone());
        up[j] += h;
        dn[j] -= h;
        let fd = (value(&up, &rho) - value(&dn, &rho)) / (2.0 * h);
        grad_err = grad_err.max((fd - gm[j]).abs() / gm[j].abs().max(1.0));
        let (mut ru, mut rd) = (rho, rho);
        ru[j] += h;
        rd[j] -= h;
        let fd = (value(&mu, &ru) - value(&mu, &rd)) / (2.0 * h);
        grad_err = grad_err.max((fd - gr[j]).abs() / gr[j].abs().max(1.0));
    }
    ok &= grad_err < 1e-3;

    let theta_star = truth.theta().to_vec();
    let medians: Vec<f64> = [200usize, 800, 3200]
        .iter()
        .map(|&n| {
            let h2: Vec<f64> = (0..20)
                .map(|r| {
                    let seed = derive_seed(11, n as u64, r);
                    let x = truth.sample(n, seed);
                    let fit = fit_gaussian_mf(&x, &prior, 4, &MfOptions { seed, ..MfOptions::default() }).unwrap();
                    hellinger_numeric(&theta_star, &fit.q.mu).unwrap().powi(2)
                })
                .collect();
            median(&h2)
        })
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    notes.push(format!("c(0) = {c0}, normalization error {norm_err:.1e}"));
    notes.push(format!("{order_fail} ordering/local-bound failures in 200 pairs"));
    notes.push(format!("gradient relative error {grad_err:.1e}"));
    notes.push(format!("median H^2 {:.2e} > {:.2e} > {:.2e}", medians[0], medians[1], medians[2]));
    outcome(ok, notes.join("; "))
}

/// Mean-field fixed point for one component: `q_mu` Gaussian, `q_tau` Gamma.
fn single_component_fixed_point(x: &[f64], h: &MixtureHyper) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let a = h.a0 + 0.5 * n;
    let mut e_tau = 1.0;
    let (mut m, mut s2) = (0.0, 1.0);
    for _ in 0..10_000 {
        let prec = 1.0 / h.sigma0_sq + 2.0 * e_tau * n;
        m = 2.0 * e_tau * sx / prec;
        s2 = 1.0 / prec;
        let b = h.b0 + x.iter().map(|v| (v - m).powi(2)).sum::<f64>() + n * s2;
        let next = a / b;
        if (next - e_tau).abs() < 1e-15 * next {
            break;
        }
        e_tau = next;
    }
    (m, s2, e_tau)
}

fn c12_mixture() -> Outcome {
    let hyper = MixtureHyper::default();
    let model = MixtureModel::new(vec![-2.0, 1.0, 3.0], vec![0.3, 0.3, 0.4], 1.0, 2).unwrap();
    let mut monotone_fail = 0;
    for seed in 0..50u64 {
        let x = model.sample(150, seed);
        let st = cavi_fixed_k(&x, 1 + (seed as usize % 4), &hyper, seed).unwrap();
        if st.elbo_trace.windows(2).any(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0)) {
            monotone_fail += 1;
        }
    }
    let one = MixtureModel::new(vec![0.0], vec![1.0], std::f64::consts::SQRT_2, 2).unwrap();
    let x = one.sample(200, 3);
    let st = cavi_fixed_k(&x, 1, &hyper, 1).unwrap();
    let (m, s2, e_tau) = single_component_fixed_point(&x, &hyper);
    let q: &ScalarGaussian = &st.q_mu[0];
    let conj_err = (q.mean - m).abs().max((q.variance - s2).abs()).max((st.expected_tau() - e_tau).abs());

    let sep = MixtureModel::new(vec![-3.0, 3.0], vec![0.5, 0.5], 0.5, 2).unwrap();
    let (k_sel, _) = select_k(&sep.sample(400, 2024), &[1, 2, 3, 4], &hyper, 7).unwrap();

    let bimodal = MixtureModel::new(vec![-1.5, 1.5], vec![0.5, 0.5], 1.0, 2).unwrap();
    let f0 = |t: f64| mixture_pdf(&bimodal, t);
    let grid = uniform_grid(-15.0, 15.0, 8001);
    let medians: Vec<f64> = [200usize, 1600]
        .iter()
        .map(|&n| {
            let h2: Vec<f64> = (0..20)
                .map(|r| {
                    let seed = derive_seed(12, n as u64, r);
                    let (_, st) = select_k(&bimodal.sample(n, seed), &[1, 2, 3, 4], &hyper, seed).unwrap();
                    hellinger_to_truth(&st, &f0, &grid).unwrap()
                })
                .collect();
            median(&h2)
        })
        .collect();
    outcome(
        monotone_fail == 0 && conj_err <= 1e-6 && k_sel == 2 && medians[1] < medians[0],
        format!(
            "{monotone_fail}/50 non-monotone runs; k=1 deviation {conj_err:.1e}; selected k = {k_sel}; median H^2 {:.2e} -> {:.2e}",
            medians[0], medians[1]
        ),
    )
}

fn c13_cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_vblab");
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("divcheck", r#"{"model": {"kind": "divergence", "pairs": 200, "min_size": 2, "max_size": 16}}"#),
        (
            "gsm-rate",
            r#"{"model": {"kind": "gsm", "alpha": 1, "radius": 2, "prior": {"kind": "gaussian", "variance": 1, "tau": 1},
                "signal": {"kind": "sobolev_boundary"}}, "n_grid": [64, 128, 256], "replications": 3}"#,
        ),
        (
            "gsm-dim",
            r#"{"model": {"kind": "gsm", "alpha": 1, "radius": 2, "prior": {"kind": "rescaled_cauchy", "scale": 1, "tau": 1},
                "signal": {"kind": "sobolev_boundary"}}, "n_grid": [64, 128, 256], "replications": 3}"#,
        ),
        (
            "gsm-lower",
            r#"{"model": {"kind": "gsm", "alpha": 1, "radius": 2, "prior": {"kind": "gaussian", "variance": 1, "tau": 1},
                "signal": {"kind": "zero"}}, "n_grid": [64, 128, 256], "replications": 3}"#,
        ),
        (
            "trunc-curve",
            r#"{"model": {"kind": "trunc_curve", "alpha": 2, "beta": 1, "t_grid": [0.2, 0.5, 1.0]}, "n_grid": [64, 128, 256]}"#,
        ),
        (
            "pc-compare",
            r#"{"model": {"kind": "piecewise", "sigma": 1, "bound": 1, "k_star": 2, "method": {"kind": "markov", "c": 1}},
                "n_grid": [32, 64, 128], "replications": 3}"#,
        ),
        (
            "mix-fit",
            r#"{"model": {"kind": "mixture", "means": [-2, 2], "weights": [0.5, 0.5], "sigma": 1, "k_candidates": [1, 2]},
                "n_grid": [50, 100], "replications": 2}"#,
        ),
        (
            "expfam-fit",
            r#"{"model": {"kind": "expfam", "theta_star": [0.5, -0.3], "k": 2}, "n_grid": [50, 100], "replications": 2}"#,
        ),
    ];
    let mut failures = Vec::new();
    for (cmd, json) in configs {
        let path = dir.path().join(format!("{cmd}.json"));
        std::fs::write(&path, json).unwrap();
        for format in ["csv", "json"] {
            let outputs: Vec<Option<Vec<u8>>> = (0..2)
                .map(|run| {
                    let out = dir.path().join(format!("{cmd}-{run}.{format}"));
                    let status = Command::new(bin)
                        .args([cmd, "--config"])
                        .arg(&path)
                        .args(["--seed", "42", "--format", format, "--out"])
                        .arg(&out)
                        .status()
                        .unwrap();
                    status.success().then(|| std::fs::read(&out).unwrap())
                })
                .collect();
            match (&outputs[0], &outputs[1]) {
                (Some(a), Some(b)) if a == b && !a.is_empty() => {}
                _ => failures.push(format!("{cmd}/{format}")),
            }
        }
    }
    let bad = Command::new(bin).args(["gsm-rate", "--config"]).arg(dir.path().join("divcheck.json")).status().unwrap();
    let exit_ok = bad.code() == Some(2);
    outcome(
        failures.is_empty() && exit_ok,
        format!("8 subcommands x 2 formats; mismatches: {:?}; wrong-model exit code {:?}", failures, bad.code()),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 13] = [
        (1, "divergence chain", c1_divergence_chain),
        (2, "GSM rate, Gaussian sieve prior", c2_gsm_rate),
        (3, "GSM rate, rescaled Cauchy prior", c3_cauchy_rate),
        (4, "GSM dimension scaling", c4_dimension),
        (5, "GSM lower-bound spike", c5_lower_bound),
        (6, "truncated-Gaussian exact risk and curve", c6_trunc_gauss),
        (7, "truncated VB beats full posterior", c7_variational_beats_posterior),
        (8, "piecewise mean-field risk is linear", c8_mean_field_trivial),
        (9, "piecewise Markov-chain risk / (k* log n)", c9_markov_rate),
        (10, "forward-backward vs enumeration", c10_forward_backward),
        (11, "exponential family", c11_expfam),
        (12, "mixture CAVI", c12_mixture),
        (13, "CLI determinism", c13_cli_determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed()
        );
        if o.pass == KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
