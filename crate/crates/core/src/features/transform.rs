use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Dimensions with zero variance; they map to 0.
    pub degenerate: Vec<bool>,
}

fn check_rows(corpus: &[Vec<f64>]) -> Result<usize> {
    let dim = corpus
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty corpus"))?;
    if corpus.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("ragged corpus"));
    }
    Ok(dim)
}

/// Per-dimension mean and sample standard deviation.
pub fn zscore_fit(corpus: &[Vec<f64>]) -> Result<ZScoreModel> {
    let dim = check_rows(corpus)?;
    let n = corpus.len() as f64;
    let mut means = vec![0.0; dim];
    for row in corpus {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut ss = vec![0.0; dim];
    for row in corpus {
        for ((s, v), m) in ss.iter_mut().zip(row).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    let stds: Vec<f64> = ss
        .iter()
        .map(|s| {
            if corpus.len() > 1 {
                (s / (n - 1.0)).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let degenerate = stds
        .iter()
        .zip(&means)
        .map(|(s, m)| *s <= 1e-12 * (1.0 + m.abs()))
        .collect();
    Ok(ZScoreModel {
        means,
        stds,
        degenerate,
    })
}

impl ZScoreModel {
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.means.len() {
            return Err(Error::invalid(format!(
                "expected {} dims, got {}",
                self.means.len(),
                v.len()
            )));
        }
        Ok(v.iter()
            .enumerate()
            .map(|(i, x)| {
                if self.degenerate[i] {
                    0.0
                } else {
                    (x - self.means[i]) / self.stds[i]
                }
            })
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Retained components as orthonormal rows.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of every component, descending.
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub retained: usize,
}

/// Principal components of the centered corpus; keeps the smallest `k`
/// whose cumulative variance ratio reaches `threshold`.
pub fn pca_fit(corpus: &[Vec<f64>], threshold: f64) -> Result<PcaModel> {
    let dim = check_rows(corpus)?;
    if corpus.len() < 2 {
        return Err(Error::invalid("PCA needs at least two rows"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("threshold must lie in (0, 1]"));
    }
    let n = corpus.len();
    let mut mean = vec![0.0; dim];
    for row in corpus {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, dim, |i, j| corpus[i][j] - mean[j]);
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 1e-300 {
        return Err(Error::invalid("degenerate corpus: all rows identical"));
    }
    let ratio: Vec<f64> = values.iter().map(|v| v / total).collect();
    let mut cum = 0.0;
    let mut retained = dim;
    for (i, r) in ratio.iter().enumerate() {
        cum += r;
        if cum >= threshold - 1e-12 {
            retained = i + 1;
            break;
        }
    }
    let components = order[..retained]
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // deterministic sign: largest-magnitude entry positive
            let big = c
                .iter()
                .copied()
                .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if big < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            c
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance: values,
        explained_ratio: ratio,
        retained,
    })
}

impl PcaModel {
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::invalid("dimension mismatch"));
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(v)
                    .zip(&self.mean)
                    .map(|((c, x), m)| c * (x - m))
                    .sum()
            })
            .collect())
    }

    pub fn project_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.project(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zscore_examples() {
        let m = zscore_fit(&[vec![0.0, 5.0], vec![2.0, 5.0]]).unwrap();
        let a = m.apply(&[0.0, 5.0]).unwrap();
        let b = m.apply(&[2.0, 5.0]).unwrap();
        assert_abs_diff_eq!(a[0], -0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b[0], 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!((a[1], b[1]), (0.0, 0.0));
        assert!(m.degenerate[1]);
        assert!(zscore_fit(&[]).is_err());
    }

    #[test]
    fn zscored_corpus_is_standardized() {
        let mut r = crate::rng::rng(8);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                (0..4)
                    .map(|j| r.random::<f64>() * (j + 1) as f64 + 10.0)
                    .collect()
            })
            .collect();
        let z = zscore_fit(&rows).unwrap().apply_all(&rows).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            assert!(crate::stats::mean(&col).abs() < 1e-10);
            assert_abs_diff_eq!(crate::stats::sample_variance(&col), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn pca_on_a_line_keeps_one_component() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])
            .collect();
        let p = pca_fit(&rows, 0.99).unwrap();
        assert_eq!(p.retained, 1);
        assert_abs_diff_eq!(p.explained_ratio[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn isotropic_gaussian_needs_both_components() {
        let mut r = crate::rng::rng(2);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![r.sample(StandardNormal), r.sample(StandardNormal)])
            .collect();
        let p = pca_fit(&rows, 0.99).unwrap();
        assert_eq!(p.retained, 2);
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
    }

    #[test]
    fn full_rank_projection_preserves_distances() {
        let mut r = crate::rng::rng(5);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| r.random()).collect())
            .collect();
        let p = pca_fit(&rows, 1.0).unwrap();
        assert_eq!(p.retained, 5);
        for (i, a) in p.components.iter().enumerate() {
            for (j, b) in p.components.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                assert_abs_diff_eq!(d, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-8);
            }
        }
        let proj = p.project_all(&rows).unwrap();
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        for i in 0..20 {
            for j in 0..20 {
                assert_abs_diff_eq!(
                    dist(&rows[i], &rows[j]),
                    dist(&proj[i], &proj[j]),
                    epsilon = 1e-10
                );
            }
        }
        assert!(p.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
        assert!(pca_fit(&vec![vec![1.0, 2.0]; 5], 0.99).is_err());
    }
}
