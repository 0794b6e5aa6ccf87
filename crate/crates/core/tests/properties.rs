use proptest::prelude::*;

use vblab::divergence::{chain_report, DiscreteDistribution};
use vblab::harness::{emit, fit_rate_exponent, read_table, Format, RateRow, RateTable};
use vblab::numeric::seed::derive_seed;
use vblab::piecewise::{default_grid, grid_posterior, ChangePointPrior, SiteDensity, TruncatedGaussian};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_chain_holds(
        w in prop::collection::vec((1e-6f64..1.0, 1e-6f64..1.0), 2..40)
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = w.into_iter().unzip();
        let p = DiscreteDistribution::from_weights(&a).unwrap();
        let q = DiscreteDistribution::from_weights(&b).unwrap();
        let r = chain_report(&p, &q).unwrap();
        prop_assert!(r.is_ordered(1e-10), "{:?}", r);
    }

    #[test]
    fn power_laws_fit_exactly(c in 0.01f64..100.0, slope in -2.0f64..1.0, start in 3u32..8) {
        let rows = (start..start + 5)
            .map(|e| {
                let n = 1u64 << e;
                RateRow { n, mean_risk: c * (n as f64).powf(slope), stderr: 0.0, replications: 1 }
            })
            .collect();
        let fit = fit_rate_exponent(&RateTable::new(rows).unwrap(), false).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-8);
    }

    #[test]
    fn derived_seeds_differ(master in any::<u64>(), n1 in 1u64..1 << 20, n2 in 1u64..1 << 20, r1 in 0u64..1000, r2 in 0u64..1000) {
        prop_assume!((n1, r1) != (n2, r2));
        prop_assert_ne!(derive_seed(master, n1, r1), derive_seed(master, n2, r2));
    }

    #[test]
    fn truncated_gaussian_moments_are_sane(center in -20.0f64..20.0, scale in 0.01f64..5.0, lo in -3.0f64..0.0, width in 0.1f64..6.0) {
        let hi = lo + width;
        let t = TruncatedGaussian::new(center, scale, lo, hi).unwrap();
        prop_assert!(t.mean() >= lo - 1e-12 && t.mean() <= hi + 1e-12);
        prop_assert!(t.variance() >= 0.0 && t.variance() <= width * width / 4.0 + 1e-12);
    }

    #[test]
    fn chain_marginals_are_distributions(x in prop::collection::vec(-3.0f64..3.0, 2..60), p in 1e-6f64..0.5) {
        let grid = default_grid(1.0, 1.0, 16).unwrap();
        let prior = ChangePointPrior::markov_with_p(p, SiteDensity::uniform_for_bound(1.0)).unwrap();
        let chain = grid_posterior(&x, 1.0, &prior, &grid).unwrap();
        for m in chain.marginals() {
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(m.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn tables_round_trip(values in prop::collection::vec((1e-12f64..1e6, 0.0f64..10.0, 1usize..500), 0..10)) {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &(m, s, r))| RateRow { n: 1 + i as u64, mean_risk: m, stderr: s, replications: r })
            .collect();
        let table = RateTable::new(rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for format in [Format::Csv, Format::Json] {
            let path = dir.path().join("t");
            emit(&table, format, &path).unwrap();
            prop_assert_eq!(&read_table(&path, format).unwrap(), &table);
        }
    }
}
