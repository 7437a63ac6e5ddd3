//! Symmetries every estimator must respect, checked on random models.

use prodtail_core::signpat::pattern_score;
use prodtail_core::{
    enumerate_admissible, mc_estimate, optimize_linear, saddle_sum_estimate, tail_quadrature, McConfig, ProductModel,
    Proposal, QuadratureConfig,
};
use proptest::prelude::*;

fn arb_model(max_n: usize) -> impl Strategy<Value = ProductModel> {
    (1usize..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], n),
                prop::collection::vec(0.3f64..3.0, n),
            )
        })
        .prop_map(|(mu, sigma)| ProductModel::new(mu, sigma).unwrap())
}

fn flip(m: &ProductModel, idx: &[usize]) -> ProductModel {
    let mut mu = m.mu().to_vec();
    for &i in idx {
        mu[i] = -mu[i];
    }
    ProductModel::new(mu, m.sigma().to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_optimum_dominates_every_pattern(m in arb_model(10)) {
        let opt = optimize_linear(&m);
        for s in enumerate_admissible(m.n()).unwrap() {
            prop_assert!(pattern_score(&m, &s).unwrap() <= opt.l_star + 1e-12);
        }
    }

    #[test]
    fn saddle_sum_scale_invariance(m in arb_model(6), c in 0.2f64..5.0, log_x in 3.0f64..25.0) {
        let x = log_x.exp();
        let a = saddle_sum_estimate(&m, x);
        let b = saddle_sum_estimate(&m.scaled(c).unwrap(), c.powi(m.n() as i32) * x);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!(close(a.log_p, b.log_p, 1e-9), "{} vs {}", a.log_p, b.log_p),
            (Err(a), Err(b)) => prop_assert_eq!(a.tag(), b.tag()),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn saddle_sum_pair_flip_invariance(m in arb_model(6), i in 0usize..6, j in 0usize..6, log_x in 3.0f64..25.0) {
        let n = m.n();
        prop_assume!(n >= 2 && i % n != j % n);
        let x = log_x.exp();
        if let (Ok(a), Ok(b)) = (saddle_sum_estimate(&m, x), saddle_sum_estimate(&flip(&m, &[i % n, j % n]), x)) {
            prop_assert!(close(a.log_p, b.log_p, 1e-9), "{} vs {}", a.log_p, b.log_p);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quadrature_scale_invariance(m in arb_model(3), c in 0.3f64..3.0, x in 0.5f64..200.0) {
        let cfg = QuadratureConfig::default();
        let a = tail_quadrature(&m, x, &cfg).unwrap();
        let b = tail_quadrature(&m.scaled(c).unwrap(), c.powi(m.n() as i32) * x, &cfg).unwrap();
        prop_assert!(close(a.log_p, b.log_p, 1e-8), "{} vs {}", a.log_p, b.log_p);
    }

    #[test]
    fn quadrature_reflection(m in arb_model(3), x in 0.1f64..20.0) {
        // P(-Z > x) + P(Z > -x) = 1, and negating one mean negates Z.
        let cfg = QuadratureConfig::default();
        let upper = tail_quadrature(&flip(&m, &[0]), x, &cfg).unwrap().log_p.exp();
        let lower = tail_quadrature(&m, -x, &cfg).unwrap().log_p.exp();
        prop_assert!((upper + lower - 1.0).abs() < 1e-9, "{upper} + {lower}");
    }

    #[test]
    fn monte_carlo_is_reproducible(m in arb_model(4), seed in any::<u64>(), x in 0.5f64..30.0) {
        for proposal in [Proposal::Plain, Proposal::SaddleTilt] {
            let cfg = McConfig::new(5_000, seed, proposal);
            let a = mc_estimate(&m, x, &cfg);
            let b = mc_estimate(&m, x, &cfg);
            prop_assert_eq!(a, b);
        }
    }
}
