//! Small helpers for arithmetic on natural-log values.

/// `log(exp(a) + exp(b))` without overflow. `-inf` is the additive identity.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum(exp(v)))`, accumulated left to right after shifting by the
/// maximum, so the result depends only on the order of `values`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() || max.is_nan() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Materialize a log value as a linear number if it is a normal double.
pub fn to_linear(log_value: f64) -> Option<f64> {
    let v = log_value.exp();
    (v.is_finite() && v >= f64::MIN_POSITIVE).then_some(v)
}

/// Pairwise reduction in a fixed tree order; the result is independent of
/// how the inputs were produced.
pub fn pairwise_reduce<T: Copy>(items: &[T], identity: T, op: impl Fn(T, T) -> T + Copy) -> T {
    match items.len() {
        0 => identity,
        1 => items[0],
        len => {
            let (left, right) = items.split_at(len / 2);
            op(
                pairwise_reduce(left, identity, op),
                pairwise_reduce(right, identity, op),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_exp_matches_direct() {
        let v = log_add_exp(1.0f64.ln(), 3.0f64.ln());
        assert!((v - 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn sum_exp_far_below_underflow() {
        let v = log_sum_exp(&[-2000.0, -2000.0, -2000.0, -2000.0]);
        assert!((v - (-2000.0 + 4.0f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn linear_view_hides_underflow() {
        assert_eq!(to_linear(0.0), Some(1.0));
        assert_eq!(to_linear(-800.0), None);
    }

    #[test]
    fn pairwise_sums() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(pairwise_reduce(&v, 0.0, |a, b| a + b), 55.0);
        assert_eq!(pairwise_reduce(&[] as &[f64], 0.0, |a, b| a + b), 0.0);
    }
}
