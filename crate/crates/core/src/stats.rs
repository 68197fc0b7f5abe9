//! Small descriptive-statistics helpers shared across modules.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population moments `[mean, variance, skewness, kurtosis]`.
///
/// Kurtosis is raw (a normal distribution has kurtosis 3). A distribution
/// with zero variance reports skewness and kurtosis as 0.
pub fn population_moments(xs: &[f64]) -> [f64; 4] {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return [0.0; 4];
    }
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // Variance below this is numerical noise around a constant signal.
    if m2 <= 1e-24 * (1.0 + m * m) {
        return [m, 0.0, 0.0, 0.0];
    }
    [m, m2, m3 / m2.powf(1.5), m4 / (m2 * m2)]
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Pearson correlation. Errors when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "pearson: length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "fewer than two paired values".into(),
        ));
    }
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_moments() {
        let xs: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.0 } else { 1.0 })
            .collect();
        let [m, v, s, k] = population_moments(&xs);
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_has_zero_higher_moments() {
        let [m, v, s, k] = population_moments(&[0.3; 10]);
        assert_abs_diff_eq!(m, 0.3, epsilon = 1e-15);
        assert!(v < 1e-30);
        assert_eq!((s, k), (0.0, 0.0));
    }

    #[test]
    fn pearson_rejects_constant() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert_abs_diff_eq!(
            pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0,
            epsilon = 1e-15
        );
    }
}
