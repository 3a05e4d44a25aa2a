//! Welch's unequal-variance t-test for comparing two rating samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample {which} has {n} values, need at least 2")]
    TooSmall { which: char, n: usize },
    #[error("sample {0} contains a non-finite value")]
    NonFinite(char),
    #[error("both samples have zero variance; the t statistic is undefined")]
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub test: String,
    /// One-sided alternative: mean of `a` greater than mean of `b`.
    pub alternative: String,
    pub t: f64,
    pub df: f64,
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Welch t statistic, Welch-Satterthwaite degrees of freedom, and p-values
/// from the Student t distribution.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, StatsError> {
    for (which, x) in [('a', a), ('b', b)] {
        if x.len() < 2 {
            return Err(StatsError::TooSmall { which, n: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(which));
        }
    }
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (var_a / na, var_b / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_one_sided = if t == 0.0 { 0.5 } else { dist.sf(t) };
    let p_two_sided = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchResult {
        test: "welch".into(),
        alternative: "mean_a > mean_b".into(),
        t,
        df,
        p_one_sided,
        p_two_sided,
        n_a: a.len(),
        n_b: b.len(),
        mean_a,
        mean_b,
        var_a,
        var_b,
    })
}
