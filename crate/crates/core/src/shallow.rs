//! L2-regularized logistic regression over feature tables, evaluated with
//! repeated 2-fold cross-validation.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::{crossval, CvConfig, CvResult};
use crate::error::{Error, Result};
use crate::features::{pca_fit, zscore_fit, FeatureTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LogRegConfig,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScore {
    pub image_id: String,
    pub classifier_id: String,
    pub score: f64,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    lambda: f64,
    dim: usize,
}

impl Problem<'_> {
    /// Parameters are `[w..., b]`.
    fn loss(&self, p: &DVector<f64>) -> f64 {
        let n = self.x.len() as f64;
        let mut l = 0.0;
        for (row, &y) in self.x.iter().zip(self.y) {
            let z = margin(p, row);
            l += softplus(z) - y as f64 * z;
        }
        let reg: f64 = p.rows(0, self.dim).norm_squared();
        l / n + 0.5 * self.lambda * reg
    }

    fn grad_hess(&self, p: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim + 1;
        let n = self.x.len() as f64;
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        let mut xi = DVector::zeros(d);
        for (row, &y) in self.x.iter().zip(self.y) {
            let s = sigmoid(margin(p, row));
            xi.rows_mut(0, self.dim).copy_from_slice(row);
            xi[self.dim] = 1.0;
            g.axpy((s - y as f64) / n, &xi, 1.0);
            h.syger(s * (1.0 - s) / n, &xi, &xi, 1.0);
        }
        for j in 0..self.dim {
            g[j] += self.lambda * p[j];
            h[(j, j)] += self.lambda;
        }
        h.fill_upper_triangle_with_lower_triangle();
        (g, h)
    }
}

fn margin(p: &DVector<f64>, row: &[f64]) -> f64 {
    let d = row.len();
    row.iter().zip(p.iter()).map(|(x, w)| x * w).sum::<f64>() + p[d]
}

/// Fit by damped Newton iterations with Armijo backtracking.
pub fn logreg_train(
    features: &[Vec<f64>],
    labels: &[u8],
    config: &LogRegConfig,
) -> Result<LogRegModel> {
    if features.len() != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 (glass) or 1 (mirror)"));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones < 2 || labels.len() - ones < 2 {
        return Err(Error::invalid("need at least two examples of each class"));
    }
    let dim = features[0].len();
    if features
        .iter()
        .any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::invalid("ragged or non-finite feature rows"));
    }
    if !(config.lambda >= 0.0) {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    let prob = Problem {
        x: features,
        y: labels,
        lambda: config.lambda,
        dim,
    };
    let mut p = DVector::zeros(dim + 1);
    let mut loss = prob.loss(&p);
    let mut converged = false;
    let mut it = 0;
    while it < config.max_iter {
        let (g, h) = prob.grad_hess(&p);
        if g.norm() < config.tol {
            converged = true;
            break;
        }
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => {
                // fall back to a ridge-stabilized system
                let mut hr = h;
                for j in 0..=dim {
                    hr[(j, j)] += 1e-8;
                }
                hr.lu().solve(&g).unwrap_or_else(|| g.clone())
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut next;
        loop {
            next = &p - &step * t;
            let l = prob.loss(&next);
            if l <= loss - 1e-4 * t * slope || t < 1e-12 {
                loss = l;
                break;
            }
            t *= 0.5;
        }
        let moved = (&next - &p).norm();
        p = next;
        it += 1;
        if moved < 1e-15 {
            break;
        }
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingDiverged {
            iteration: it,
            loss,
        });
    }
    Ok(LogRegModel {
        weights: p.rows(0, dim).iter().copied().collect(),
        bias: p[dim],
        config: *config,
        iterations: it,
        converged,
    })
}

impl LogRegModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
        Ok(sigmoid(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ShallowConfig {
    pub logreg: LogRegConfig,
    pub cv: CvConfig,
    /// Reduce z-scored features by PCA to this cumulative variance first.
    pub pca_threshold: Option<f64>,
}

pub struct ShallowEvaluation {
    pub image_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub cv: CvResult,
    pub scores: Vec<PredictionScore>,
    pub dims_used: usize,
}

/// Z-score the whole evaluation pool, optionally reduce by PCA, then
/// cross-validate a logistic regression. Items in `exclude` take no part.
pub fn crossval_scores(
    table: &FeatureTable,
    labels: &HashMap<String, u8>,
    exclude: &HashSet<String>,
    classifier_id: &str,
    config: &ShallowConfig,
) -> Result<ShallowEvaluation> {
    let mut ids = Vec::new();
    let mut ys = Vec::new();
    let mut rows = Vec::new();
    for (id, row) in table.image_ids.iter().zip(&table.rows) {
        if exclude.contains(id) {
            continue;
        }
        if let Some(&y) = labels.get(id) {
            ids.push(id.clone());
            ys.push(y);
            rows.push(row.clone());
        }
    }
    if rows.len() < 4 {
        return Err(Error::invalid(
            "too few labeled items for 2-fold cross-validation",
        ));
    }
    let z = zscore_fit(&rows)?.apply_all(&rows)?;
    let x = match config.pca_threshold {
        Some(t) => pca_fit(&z, t)?.project_all(&z)?,
        None => z,
    };
    let dims_used = x[0].len();
    let cv = crossval(&ys, &config.cv, |_, train, test| {
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<u8> = train.iter().map(|&i| ys[i]).collect();
        let model = logreg_train(&xt, &yt, &config.logreg)?;
        test.iter().map(|&i| model.predict(&x[i])).collect()
    })?;
    let scores = ids
        .iter()
        .zip(&cv.scores)
        .map(|(id, s)| PredictionScore {
            image_id: id.clone(),
            classifier_id: classifier_id.to_owned(),
            score: *s,
        })
        .collect();
    Ok(ShallowEvaluation {
        image_ids: ids,
        labels: ys,
        cv,
        scores,
        dims_used,
    })
}

pub fn write_scores(path: &Path, scores: &[PredictionScore]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for s in scores {
        serde_json::to_writer(&mut f, s)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<PredictionScore>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use statrs::distribution::{Binomial, DiscreteCDF};

    fn boundary(m: &LogRegModel) -> f64 {
        -m.bias / m.weights[0]
    }

    #[test]
    fn separable_one_dimensional() {
        let x: Vec<Vec<f64>> = (-10..=10)
            .filter(|&i| i != 0)
            .map(|i| vec![i as f64 * 0.1 + 0.05])
            .collect();
        let y: Vec<u8> = x.iter().map(|r| (r[0] > 0.0) as u8).collect();
        let m = logreg_train(&x, &y, &LogRegConfig::default()).unwrap();
        let acc = x
            .iter()
            .zip(&y)
            .filter(|(r, &l)| (m.predict(r).unwrap() > 0.5) == (l == 1))
            .count();
        assert_eq!(acc, x.len());
        assert!(m.converged);
    }

    #[test]
    fn duplicated_rows_leave_boundary_unchanged() {
        let mut r = crate::rng::rng(3);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![r.random::<f64>() * 4.0 - 2.0])
            .collect();
        let y: Vec<u8> = x
            .iter()
            .map(|v| (v[0] + 0.5 * r.random::<f64>() - 0.25 > 0.0) as u8)
            .collect();
        let a = logreg_train(&x, &y, &LogRegConfig::default()).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<u8> = y.iter().chain(&y).copied().collect();
        let b = logreg_train(&x2, &y2, &LogRegConfig::default()).unwrap();
        assert_abs_diff_eq!(boundary(&a), boundary(&b), epsilon = 1e-6);
    }

    #[test]
    fn column_permutation_permutes_weights() {
        let mut r = crate::rng::rng(6);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| r.random::<f64>() - 0.5).collect())
            .collect();
        let y: Vec<u8> = x
            .iter()
            .map(|v| (v[0] - 2.0 * v[2] + 0.3 * (r.random::<f64>() - 0.5) > 0.0) as u8)
            .collect();
        let a = logreg_train(&x, &y, &LogRegConfig::default()).unwrap();
        let xp: Vec<Vec<f64>> = x.iter().map(|v| vec![v[2], v[0], v[1]]).collect();
        let b = logreg_train(&xp, &y, &LogRegConfig::default()).unwrap();
        assert_abs_diff_eq!(a.weights[2], b.weights[0], epsilon = 1e-6);
        assert_abs_diff_eq!(a.weights[0], b.weights[1], epsilon = 1e-6);
        assert_abs_diff_eq!(a.bias, b.bias, epsilon = 1e-6);
    }

    #[test]
    fn predict_examples() {
        let zero = LogRegModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            config: LogRegConfig::default(),
            iterations: 0,
            converged: true,
        };
        assert_eq!(zero.predict(&[3.0, -1.0]).unwrap(), 0.5);
        let m = LogRegModel {
            weights: vec![1.0],
            ..zero.clone()
        };
        assert_abs_diff_eq!(m.predict(&[3f64.ln()]).unwrap(), 0.75, epsilon = 1e-12);
        assert!(m.predict(&[1.0]).unwrap() < m.predict(&[1.1]).unwrap());
        assert!(zero.predict(&[1.0]).is_err());
        assert!(logreg_train(&[vec![1.0], vec![2.0]], &[1, 1], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn random_labels_give_chance_accuracy() {
        let mut r = crate::rng::rng(11);
        let n = 400;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| r.random::<f64>()).collect())
            .collect();
        let y: Vec<u8> = (0..n).map(|_| r.random::<bool>() as u8).collect();
        let cfg = CvConfig {
            repetitions: 5,
            folds: 2,
            seed: 2,
        };
        let res = crossval(&y, &cfg, |_, train, test| {
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let m = logreg_train(&xt, &yt, &LogRegConfig::default())?;
            test.iter().map(|&i| m.predict(&x[i])).collect()
        })
        .unwrap();
        // two-sided 99.9% binomial interval around 0.5
        let b = Binomial::new(0.5, n as u64).unwrap();
        let lo = (0..=n as u64).find(|&k| b.cdf(k) > 0.0005).unwrap() as f64 / n as f64;
        for a in &res.accuracy {
            assert!((a - 0.5).abs() <= 0.5 - lo, "accuracy {a}");
        }
    }
}
