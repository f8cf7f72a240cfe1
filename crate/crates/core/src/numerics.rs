//! Order-independent reductions and small statistics helpers.
//!
//! All ensemble reductions go through [`sum`], which is a fixed-shape pairwise
//! summation. Because the summation tree depends only on the slice length,
//! results do not depend on how the values were produced (thread count,
//! scheduling).

use serde::{Deserialize, Serialize};

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise summation with a fixed block size.
pub fn sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    sum(&values[..mid]) + sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values) / values.len() as f64
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Estimate {
                value: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let m = mean(values);
        if n == 1 {
            return Estimate {
                value: m,
                stderr: f64::NAN,
                n,
            };
        }
        let dev: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
        let var = sum(&dev) / (n - 1) as f64;
        Estimate {
            value: m,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Delete-one jackknife standard error of the mean.
    pub fn jackknife(values: &[f64]) -> Self {
        let n = values.len();
        if n < 2 {
            return Self::from_samples(values);
        }
        let total = sum(values);
        let full = total / n as f64;
        let loo: Vec<f64> = values
            .iter()
            .map(|v| {
                let theta = (total - v) / (n - 1) as f64;
                (theta - full) * (theta - full)
            })
            .collect();
        let var = (n - 1) as f64 / n as f64 * sum(&loo);
        Estimate {
            value: full,
            stderr: var.sqrt(),
            n,
        }
    }

    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }
}

/// Ordinary least-squares fit `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
    let b = sum(&sxy) / sum(&sxx);
    (my - b * mx, b)
}

/// Median of a slice (NaN-free input), averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jackknife_of_mean_matches_classical_stderr() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let a = Estimate::from_samples(&v);
        let b = Estimate::jackknife(&v);
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.stderr - b.stderr).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pairwise_sum_close_to_naive(v in proptest::collection::vec(-1e3f64..1e3, 0..500)) {
            let naive: f64 = v.iter().sum();
            prop_assert!((sum(&v) - naive).abs() <= 1e-9 * (1.0 + v.iter().map(|x| x.abs()).sum::<f64>()));
        }
    }
}
