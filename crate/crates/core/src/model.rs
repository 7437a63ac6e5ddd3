//! Parameters of `Z = X_1 ... X_n` with independent `X_i ~ N(mu_i, sigma_i^2)`.
//!
//! Model files are JSON objects with two equal-length arrays:
//!
//! ```text
//! {"mu":[1.0,0.7,-0.4,1.3],"sigma":[1.0,1.2,1.5,0.9]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated parameter vectors. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductModel {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl ProductModel {
    /// Validate candidate parameter lists.
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::LengthMismatch {
                expected: mu.len(),
                found: sigma.len(),
            });
        }
        if mu.is_empty() {
            return Err(Error::EmptyModel);
        }
        for (index, m) in mu.iter().enumerate() {
            if !m.is_finite() {
                return Err(Error::NonFiniteParameter { name: "mu", index });
            }
        }
        for (index, &s) in sigma.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteParameter { name: "sigma", index });
            }
            if s <= 0.0 {
                return Err(Error::NonPositiveSigma { index, value: s });
            }
        }
        Ok(Self { mu, sigma })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `log prod sigma_i`.
    pub fn log_sigma_product(&self) -> f64 {
        self.sigma.iter().map(|s| s.ln()).sum()
    }

    /// `log C = -sum mu_i^2 / (2 sigma_i^2)`.
    pub fn log_c(&self) -> f64 {
        -0.5 * self.sum_squared_ratios()
    }

    /// `sum (mu_i / sigma_i)^2`.
    pub fn sum_squared_ratios(&self) -> f64 {
        self.mu.iter().zip(&self.sigma).map(|(m, s)| (m / s) * (m / s)).sum()
    }

    pub fn all_means_zero(&self) -> bool {
        self.mu.iter().all(|&m| m == 0.0)
    }

    /// Rescale to `(c mu, c sigma)`; the product scales by `c^n`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.mu.iter().map(|m| c * m).collect(),
            self.sigma.iter().map(|s| c * s).collect(),
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(raw.mu, raw.sigma)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("finite floats always serialize")
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")
    }
}

/// `a_i = mu_i / sigma_i` and the set of exactly-zero means.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedRatios {
    pub a: Vec<f64>,
    pub zero_set: Vec<usize>,
}

impl StandardizedRatios {
    pub fn k(&self) -> usize {
        self.zero_set.len()
    }
}

/// Zero means are detected by exact comparison on the input value.
pub fn standardized_ratios(model: &ProductModel) -> StandardizedRatios {
    let a = model.mu().iter().zip(model.sigma()).map(|(m, s)| m / s).collect();
    let zero_set = model
        .mu()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m == 0.0)
        .map(|(i, _)| i)
        .collect();
    StandardizedRatios { a, zero_set }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn illustration() -> ProductModel {
        ProductModel::new(vec![1.0, 0.7, -0.4, 1.3], vec![1.0, 1.2, 1.5, 0.9]).unwrap()
    }

    #[test]
    fn validates_good_models() {
        assert_eq!(illustration().n(), 4);
        assert_eq!(ProductModel::new(vec![0.0], vec![1.0]).unwrap().n(), 1);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(matches!(
            ProductModel::new(vec![1.0], vec![0.0]),
            Err(Error::NonPositiveSigma { index: 0, .. })
        ));
        assert!(matches!(
            ProductModel::new(vec![1.0], vec![-2.0]),
            Err(Error::NonPositiveSigma { .. })
        ));
        assert_eq!(ProductModel::new(vec![], vec![]), Err(Error::EmptyModel));
        assert!(matches!(
            ProductModel::new(vec![1.0, 2.0], vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            ProductModel::new(vec![f64::NAN], vec![1.0]),
            Err(Error::NonFiniteParameter { name: "mu", .. })
        ));
        assert!(matches!(
            ProductModel::new(vec![1.0], vec![f64::INFINITY]),
            Err(Error::NonFiniteParameter { name: "sigma", .. })
        ));
    }

    #[test]
    fn ratios_of_illustration_model() {
        let r = standardized_ratios(&illustration());
        let expected = [1.0, 0.7 / 1.2, -0.4 / 1.5, 1.3 / 0.9];
        assert_eq!(r.a, expected);
        assert!((r.a[1] - 0.583_333_333_333_333_3).abs() < 1e-15);
        assert!((r.a[2] + 0.266_666_666_666_666_7).abs() < 1e-15);
        assert!((r.a[3] - 1.444_444_444_444_444_4).abs() < 1e-15);
        assert_eq!(r.k(), 0);
    }

    #[test]
    fn ratios_with_zero_means() {
        let m = ProductModel::new(vec![0.0, 0.0, 0.0], vec![2.0, 3.0, 4.0]).unwrap();
        let r = standardized_ratios(&m);
        assert_eq!(r.a, vec![0.0, 0.0, 0.0]);
        assert_eq!(r.k(), 3);
        let m = ProductModel::new(vec![5.0], vec![5.0]).unwrap();
        let r = standardized_ratios(&m);
        assert_eq!(r.a, vec![1.0]);
        assert_eq!(r.k(), 0);
    }

    #[test]
    fn parses_file_format() {
        let m = ProductModel::from_json_str(r#"{"mu":[1.0,0.7,-0.4,1.3],"sigma":[1.0,1.2,1.5,0.9]}"#).unwrap();
        assert_eq!(m, illustration());
        assert!(matches!(
            ProductModel::from_json_str(r#"{"means":[1.0],"sigma":[1.0]}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            ProductModel::from_json_str(r#"{"mu":[1.0],"sigma":[0]}"#),
            Err(Error::NonPositiveSigma { .. })
        ));
    }

    proptest! {
        #[test]
        fn json_round_trip(
            params in prop::collection::vec((-1e3f64..1e3, 1e-3f64..1e3), 1..10)
        ) {
            let (mu, sigma): (Vec<f64>, Vec<f64>) = params.into_iter().unzip();
            let m = ProductModel::new(mu, sigma).unwrap();
            let back = ProductModel::from_json_str(&m.to_json_string()).unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn ratios_are_scale_invariant(
            params in prop::collection::vec((-10f64..10.0, 0.1f64..10.0), 1..10),
            c in prop::sample::select(vec![0.5, 2.0, 4.0, 0.25, 8.0]),
        ) {
            // Power-of-two scales keep both divisions exact.
            let (mu, sigma): (Vec<f64>, Vec<f64>) = params.into_iter().unzip();
            let m = ProductModel::new(mu, sigma).unwrap();
            let a = standardized_ratios(&m);
            let b = standardized_ratios(&m.scaled(c).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn ratios_scale_invariant_to_rounding(
            params in prop::collection::vec((-10f64..10.0, 0.1f64..10.0), 1..10),
            c in 0.01f64..100.0,
        ) {
            let (mu, sigma): (Vec<f64>, Vec<f64>) = params.into_iter().unzip();
            let m = ProductModel::new(mu, sigma).unwrap();
            let a = standardized_ratios(&m);
            let b = standardized_ratios(&m.scaled(c).unwrap());
            prop_assert_eq!(&a.zero_set, &b.zero_set);
            for (x, y) in a.a.iter().zip(&b.a) {
                prop_assert!((x - y).abs() <= 4.0 * f64::EPSILON * x.abs());
            }
        }
    }
}
