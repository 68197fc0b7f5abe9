//! Gaussian-process surrogate with a squared-exponential ARD kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Noise standard deviation on the standardized targets; its square is the
/// diagonal jitter.
pub const NOISE_FLOOR: f64 = 1e-6;
const LOG_LS_BOUNDS: (f64, f64) = (-3.912, 3.912); // ln 0.02, ln 50
const LOG_SF_BOUNDS: (f64, f64) = (-3.0, 3.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub log_lengthscales: Vec<f64>,
    /// Log signal variance.
    pub log_signal: f64,
}

impl KernelParams {
    pub fn new(dim: usize) -> Self {
        Self {
            log_lengthscales: vec![(0.5f64).ln(); dim],
            log_signal: 0.0,
        }
    }

    fn inv_sq(&self) -> Vec<f64> {
        self.log_lengthscales
            .iter()
            .map(|l| (-2.0 * l).exp())
            .collect()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        se(a, b, &self.inv_sq(), self.log_signal.exp())
    }
}

fn se(a: &[f64], b: &[f64], inv_sq: &[f64], signal: f64) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .zip(inv_sq)
        .map(|((x, y), w)| (x - y) * (x - y) * w)
        .sum();
    signal * (-0.5 * d).exp()
}

#[derive(Debug, Clone)]
pub struct Gp {
    pub params: KernelParams,
    xs: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    inv_sq: Vec<f64>,
}

fn gram(params: &KernelParams, xs: &[Vec<f64>], jitter: f64) -> DMatrix<f64> {
    let n = xs.len();
    let (w, sf) = (params.inv_sq(), params.log_signal.exp());
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = se(&xs[i], &xs[j], &w, sf);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += jitter;
    }
    k
}

/// Cholesky of the gram matrix, raising the jitter if duplicates make it
/// numerically singular.
fn factor(params: &KernelParams, xs: &[Vec<f64>]) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = NOISE_FLOOR * NOISE_FLOOR;
    for _ in 0..10 {
        if let Some(c) = Cholesky::new(gram(params, xs, jitter)) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::invalid(
        "surrogate covariance is not positive definite",
    ))
}

fn standardize(ys: &[f64]) -> (f64, f64, DVector<f64>) {
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    (
        m,
        sd,
        DVector::from_iterator(ys.len(), ys.iter().map(|y| (y - m) / sd)),
    )
}

/// Log marginal likelihood of standardized targets and its gradient with
/// respect to `[log_lengthscales.., log_signal]`.
pub fn log_marginal_likelihood(
    params: &KernelParams,
    xs: &[Vec<f64>],
    y: &DVector<f64>,
) -> Result<(f64, Vec<f64>)> {
    let n = xs.len();
    let d = params.log_lengthscales.len();
    let (chol, _) = factor(params, xs)?;
    let alpha = chol.solve(y);
    let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lml = -0.5 * y.dot(&alpha) - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let kinv = chol.inverse();
    let w = params.inv_sq();
    let sf = params.log_signal.exp();
    let mut grad = vec![0.0; d + 1];
    let mut per = vec![0.0; d];
    for i in 0..n {
        for j in 0..n {
            let a = alpha[i] * alpha[j] - kinv[(i, j)];
            let mut dist = 0.0;
            for k in 0..d {
                per[k] = (xs[i][k] - xs[j][k]).powi(2) * w[k];
                dist += per[k];
            }
            let kij = sf * (-0.5 * dist).exp();
            for k in 0..d {
                grad[k] += 0.5 * a * kij * per[k];
            }
            grad[d] += 0.5 * a * kij;
        }
    }
    Ok((lml, grad))
}

impl Gp {
    /// Fit to observations; kernel parameters start from `init` and climb the
    /// marginal likelihood with `steps` Adam iterations.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], init: KernelParams, steps: usize) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InsufficientData(
                "surrogate needs at least two observations".into(),
            ));
        }
        let dim = xs[0].len();
        if init.log_lengthscales.len() != dim || xs.iter().any(|x| x.len() != dim) {
            return Err(Error::invalid("observation dimensions disagree"));
        }
        let (y_mean, y_std, y) = standardize(ys);
        let mut p = init;
        let (b1, b2, lr, eps) = (0.9, 0.999, 0.05, 1e-8);
        let mut m = vec![0.0; dim + 1];
        let mut v = vec![0.0; dim + 1];
        let mut best = (f64::NEG_INFINITY, p.clone());
        for t in 1..=steps {
            let Ok((lml, g)) = log_marginal_likelihood(&p, xs, &y) else {
                break;
            };
            if lml > best.0 {
                best = (lml, p.clone());
            }
            for k in 0..=dim {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let mh = m[k] / (1.0 - b1.powi(t as i32));
                let vh = v[k] / (1.0 - b2.powi(t as i32));
                let step = lr * mh / (vh.sqrt() + eps);
                if k < dim {
                    p.log_lengthscales[k] =
                        (p.log_lengthscales[k] + step).clamp(LOG_LS_BOUNDS.0, LOG_LS_BOUNDS.1);
                } else {
                    p.log_signal = (p.log_signal + step).clamp(LOG_SF_BOUNDS.0, LOG_SF_BOUNDS.1);
                }
            }
        }
        if steps > 0 {
            if let Ok((lml, _)) = log_marginal_likelihood(&p, xs, &y) {
                if lml > best.0 {
                    best = (lml, p.clone());
                }
            }
            p = best.1;
        }
        let (chol, _) = factor(&p, xs)?;
        let alpha = chol.solve(&y);
        let inv_sq = p.inv_sq();
        Ok(Self {
            params: p,
            xs: xs.to_vec(),
            y_mean,
            y_std,
            chol,
            alpha,
            inv_sq,
        })
    }

    fn kvec(&self, x: &[f64]) -> DVector<f64> {
        let sf = self.params.log_signal.exp();
        DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|xi| se(x, xi, &self.inv_sq, sf)),
        )
    }

    /// Posterior mean and variance in the original target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k = self.kvec(x);
        let mu = k.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k)
            .expect("triangular factor");
        let var = (self.params.log_signal.exp() - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_std * mu, var * self.y_std * self.y_std)
    }

    /// Expected improvement over `best` and its gradient in `x`.
    pub fn ei_with_grad(&self, x: &[f64], best: f64) -> (f64, Vec<f64>) {
        let d = x.len();
        let k = self.kvec(x);
        let beta = self.chol.solve(&k);
        let mu_s = k.dot(&self.alpha);
        let var_s = (self.params.log_signal.exp() - k.dot(&beta)).max(0.0);
        let f_s = (best - self.y_mean) / self.y_std;
        let sigma = var_s.sqrt();
        let (ei, dmu, dsig) = ei_parts(mu_s, sigma, f_s);
        let mut grad = vec![0.0; d];
        if dmu != 0.0 || dsig != 0.0 {
            for (i, xi) in self.xs.iter().enumerate() {
                let ki = k[i];
                for c in 0..d {
                    // dk_i/dx_c
                    let dk = -ki * (x[c] - xi[c]) * self.inv_sq[c];
                    grad[c] += dmu * self.alpha[i] * dk;
                    if sigma > 0.0 {
                        grad[c] += dsig * (-beta[i] * dk / sigma);
                    }
                }
            }
        }
        (
            ei * self.y_std,
            grad.into_iter().map(|g| g * self.y_std).collect(),
        )
    }
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// `(EI, dEI/dmu, dEI/dsigma)` for maximization.
fn ei_parts(mu: f64, sigma: f64, best: f64) -> (f64, f64, f64) {
    if sigma <= 0.0 {
        return if mu > best {
            (mu - best, 1.0, 0.0)
        } else {
            (0.0, 0.0, 0.0)
        };
    }
    let z = (mu - best) / sigma;
    let (cdf, pdf) = (norm_cdf(z), norm_pdf(z));
    (((mu - best) * cdf + sigma * pdf).max(0.0), cdf, pdf)
}

/// Closed-form expected improvement of a Gaussian `N(mu, sigma^2)` over `best`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    ei_parts(mu, sigma, best).0
}
