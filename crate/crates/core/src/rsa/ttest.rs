use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestMode {
    TwoSample,
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    /// Two-tailed.
    pub p: f64,
    /// Pooled (or difference) variance was zero; `t` is 0 or infinite.
    pub zero_variance: bool,
}

/// Two-tailed p of Student's t with `df` degrees of freedom.
pub fn t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Pooled-variance two-sample or paired-difference t-test.
pub fn ttest(a: &[f64], b: &[f64], mode: TTestMode) -> Result<TTestResult> {
    let (diff, se2, df) = match mode {
        TTestMode::TwoSample => {
            let (n1, n2) = (a.len(), b.len());
            if n1 < 2 || n2 < 2 {
                return Err(Error::InsufficientData(
                    "two-sample t needs two values per group".into(),
                ));
            }
            let df = n1 + n2 - 2;
            let sp = ((n1 - 1) as f64 * sample_variance(a) + (n2 - 1) as f64 * sample_variance(b))
                / df as f64;
            (
                mean(a) - mean(b),
                sp * (1.0 / n1 as f64 + 1.0 / n2 as f64),
                df,
            )
        }
        TTestMode::Paired => {
            if a.len() != b.len() {
                return Err(Error::invalid("paired t needs equal-length samples"));
            }
            if a.len() < 2 {
                return Err(Error::InsufficientData("paired t needs two pairs".into()));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let n = d.len();
            (mean(&d), sample_variance(&d) / n as f64, n - 1)
        }
    };
    if se2 <= 0.0 {
        let t = if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        return Ok(TTestResult {
            t,
            df,
            p,
            zero_variance: true,
        });
    }
    let t = diff / se2.sqrt();
    Ok(TTestResult {
        t,
        df,
        p: t_two_tailed_p(t, df as f64),
        zero_variance: false,
    })
}
