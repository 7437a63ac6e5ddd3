//! Cross-checks between the four estimators on small models where the
//! quadrature is exact to near machine precision.

use prodtail_core::{
    mc_estimate, saddle_sum_estimate, tail_quadrature, theorem1_estimate, Error, McConfig, ProductModel, Proposal,
    QuadratureConfig,
};

const GRID: [f64; 4] = [10.0, 30.0, 100.0, 300.0];

fn model(mu: &[f64], sigma: &[f64]) -> ProductModel {
    ProductModel::new(mu.to_vec(), sigma.to_vec()).unwrap()
}

fn models() -> Vec<ProductModel> {
    vec![
        model(&[1.0, 0.5], &[1.0, 1.0]),
        model(&[0.0, 0.0], &[1.0, 2.0]),
        model(&[0.8, -0.6, 1.1], &[1.0, 0.7, 1.3]),
    ]
}

fn quad(m: &ProductModel, x: f64) -> f64 {
    tail_quadrature(m, x, &QuadratureConfig::default()).unwrap().log_p
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).exp_m1().abs()
}

#[test]
fn quadrature_matches_bessel_tail() {
    // log((1/pi) int_{x/2}^inf K0), 50-digit reference.
    let reference = [
        -6.826_084_926_169_45,
        -17.311_511_943_717_134,
        -52.887_140_303_533_9,
        -153.428_387_327_309_09,
    ];
    let m = model(&[0.0, 0.0], &[1.0, 2.0]);
    for (x, expected) in GRID.into_iter().zip(reference) {
        let got = quad(&m, x);
        assert!(rel(got, expected) < 1e-9, "x={x}: {got} vs {expected}");
    }
}

#[test]
fn saddle_sum_converges_to_quadrature() {
    for m in models() {
        let errs: Vec<f64> = GRID
            .iter()
            .map(|&x| rel(saddle_sum_estimate(&m, x).unwrap().log_p, quad(&m, x)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{m:?}: {errs:?}");
        assert!(errs[3] < 0.015, "{m:?}: {errs:?}");
    }
}

#[test]
fn theorem1_gap_shrinks() {
    for m in models() {
        if m.all_means_zero() {
            assert_eq!(theorem1_estimate(&m, 10.0).unwrap_err(), Error::AllMeansZero);
            continue;
        }
        let errs: Vec<f64> = GRID
            .iter()
            .map(|&x| rel(theorem1_estimate(&m, x).unwrap().0.log_p, quad(&m, x)))
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{m:?}: {errs:?}");
    }
}

#[test]
fn tilted_monte_carlo_matches_quadrature() {
    for m in models() {
        for x in [3.0, 30.0, 300.0] {
            let est = mc_estimate(&m, x, &McConfig::new(200_000, 5, Proposal::SaddleTilt)).unwrap();
            let se = est.rel_stderr.unwrap();
            let err = rel(est.log_p, quad(&m, x));
            assert!(err < 4.0 * se, "{m:?} x={x}: {err} vs se {se}");
        }
    }
}

#[test]
fn plain_monte_carlo_matches_quadrature() {
    let m = model(&[0.8, -0.6, 1.1], &[1.0, 0.7, 1.3]);
    for x in [0.5, 3.0, 8.0] {
        let est = mc_estimate(&m, x, &McConfig::new(1_000_000, 9, Proposal::Plain)).unwrap();
        let err = rel(est.log_p, quad(&m, x));
        assert!(err < 4.0 * est.rel_stderr.unwrap(), "x={x}: {err}");
    }
}

#[test]
fn breakdown_terms_add_up() {
    let m = model(&[1.0, 0.7, -0.4, 1.3], &[1.0, 1.2, 1.5, 0.9]);
    for x in [1e2, 1e6, 1e12] {
        let (est, b) = theorem1_estimate(&m, x).unwrap();
        let sum = b.log_c + b.exp_quadratic + b.exp_linear + b.exp_const + b.log_prefactor;
        assert!((sum - b.log_total).abs() <= 1e-12 * b.log_total.abs());
        assert_eq!(est.log_p, b.log_total);
    }
}

#[test]
fn model_file_round_trip() {
    let m = model(&[1.0, 0.7, -0.4, 1.3], &[1.0, 1.2, 1.5, 0.9]);
    let path = std::env::temp_dir().join(format!("prodtail-model-{}.json", std::process::id()));
    m.write_file(&path).unwrap();
    let back = ProductModel::read_file(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, m);
}

#[test]
fn deep_tail_needs_tilting() {
    // p is about 1e-12 here: a million plain draws see nothing.
    let m = model(&[1.0, 0.7, -0.4, 1.3], &[1.0, 1.2, 1.5, 0.9]);
    let x = 470.0;
    let plain = mc_estimate(&m, x, &McConfig::new(1_000_000, 3, Proposal::Plain)).unwrap_err();
    assert_eq!(plain.tag(), "degenerate-variance");

    let tilted = mc_estimate(&m, x, &McConfig::new(1_000_000, 3, Proposal::SaddleTilt)).unwrap();
    let se = tilted.rel_stderr.unwrap();
    assert!(se < 0.01, "{se}");
    let exact = quad(&m, x);
    assert!((exact / std::f64::consts::LN_10 + 12.0).abs() < 0.2);
    assert!(rel(tilted.log_p, exact) < 4.0 * se);
    let asymptotic = theorem1_estimate(&m, x).unwrap().0.log_p;
    assert!(rel(asymptotic, tilted.log_p) < 0.4);
}
