use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RegressionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    /// Infinite (signed) when the differences have zero variance but a
    /// nonzero mean.
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub mean_difference: f64,
    pub degenerate_variance: bool,
}

/// Two-sided p-value of `t` under Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: usize) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Two-sided paired t-test on `a[i] - b[i]`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest, RegressionError> {
    if a.len() != b.len() {
        return Err(RegressionError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(RegressionError::TooShort(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = n - 1;
    let mean = d.iter().sum::<f64>() / n as f64;
    if d.iter().all(|&v| v == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, df, mean_difference: 0.0, degenerate_variance: false });
    }
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / df as f64;
    if var == 0.0 {
        return Ok(TTest { t: f64::INFINITY.copysign(mean), p: 0.0, df, mean_difference: mean, degenerate_variance: true });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest { t, p: two_sided_p(t, df), df, mean_difference: mean, degenerate_variance: false })
}
