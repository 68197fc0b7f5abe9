//! Central finite-difference audits of every layer's backward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::{
    cross_entropy, max_pool, max_pool_backward, relu, relu_backward, BatchNorm, Conv2d, Dense,
    Mode, Tensor,
};
use super::model::{class_index, CnnConfig, CnnModel};
use crate::error::Result;
use crate::rng;

const H: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn randn(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compare `analytic` against central differences of `f` over `values`.
fn audit(values: &mut [f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> (f64, usize) {
    let mut worst = 0.0f64;
    for i in 0..values.len() {
        let v = values[i];
        values[i] = v + H;
        let up = f(values);
        values[i] = v - H;
        let down = f(values);
        values[i] = v;
        worst = worst.max(rel_error(analytic[i], (up - down) / (2.0 * H)));
    }
    (worst, values.len())
}

fn report(name: &str, parts: &[(f64, usize)]) -> GradReport {
    GradReport {
        name: name.into(),
        max_rel_error: parts.iter().map(|p| p.0).fold(0.0, f64::max),
        checked: parts.iter().map(|p| p.1).sum(),
    }
}

pub fn check_conv(k: usize, seed: u64) -> Result<GradReport> {
    let mut r = rng::rng_for(seed, "gradcheck-conv");
    let (cin, cout) = (2, 3);
    let x = Tensor::from_vec(2, 5, 5, cin, randn(&mut r, 2 * 5 * 5 * cin))?;
    let mut conv = Conv2d::new(k, cin, cout, &mut r);
    conv.bias.value = randn(&mut r, cout);
    let up = randn(&mut r, 2 * 5 * 5 * cout);
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    let out = conv.forward(&x, true)?;
    let g = conv.backward(&Tensor {
        data: up.clone(),
        ..out
    });
    let (gw, gb) = (conv.weight.grad.clone(), conv.bias.grad.clone());

    let base = conv.clone();
    let loss_x = |xv: &[f64]| {
        let mut c = base.clone();
        let t = Tensor {
            data: xv.to_vec(),
            ..x.clone()
        };
        dot(&c.forward(&t, false).expect("shape checked").data, &up)
    };
    let mut xs = x.data.clone();
    let a = audit(&mut xs, &g.data, loss_x);
    let mut ws = base.weight.value.clone();
    let b = audit(&mut ws, &gw, |w| {
        let mut c = base.clone();
        c.weight.value = w.to_vec();
        dot(&c.forward(&x, false).expect("shape checked").data, &up)
    });
    let mut bs = base.bias.value.clone();
    let c = audit(&mut bs, &gb, |b| {
        let mut c = base.clone();
        c.bias.value = b.to_vec();
        dot(&c.forward(&x, false).expect("shape checked").data, &up)
    });
    Ok(report(&format!("conv{k}x{k}"), &[a, b, c]))
}

pub fn check_batch_norm(seed: u64) -> Result<GradReport> {
    let mut r = rng::rng_for(seed, "gradcheck-bn");
    let c = 3;
    let x = Tensor::from_vec(4, 3, 3, c, randn(&mut r, 4 * 9 * c))?;
    let mut bn = BatchNorm::new(c);
    bn.gamma.value = randn(&mut r, c);
    bn.beta.value = randn(&mut r, c);
    bn.gamma.zero_grad();
    bn.beta.zero_grad();
    let up = randn(&mut r, x.data.len());
    let out = bn.forward(&x, Mode::Train, true)?;
    let g = bn.backward(&Tensor {
        data: up.clone(),
        ..out
    });
    let base = bn.clone();
    let eval = |b: &mut BatchNorm, t: &Tensor| {
        dot(
            &b.forward(t, Mode::Train, false).expect("checked").data,
            &up,
        )
    };
    let mut xs = x.data.clone();
    let a = audit(&mut xs, &g.data, |v| {
        let mut b = base.clone();
        eval(
            &mut b,
            &Tensor {
                data: v.to_vec(),
                ..x.clone()
            },
        )
    });
    let mut gs = base.gamma.value.clone();
    let b = audit(&mut gs, &base.gamma.grad, |v| {
        let mut b = base.clone();
        b.gamma.value = v.to_vec();
        eval(&mut b, &x)
    });
    let mut be = base.beta.value.clone();
    let cc = audit(&mut be, &base.beta.grad, |v| {
        let mut b = base.clone();
        b.beta.value = v.to_vec();
        eval(&mut b, &x)
    });
    Ok(report("batch_norm", &[a, b, cc]))
}

pub fn check_relu_pool(seed: u64) -> Result<GradReport> {
    let mut r = rng::rng_for(seed, "gradcheck-pool");
    let x = Tensor::from_vec(2, 4, 4, 2, randn(&mut r, 64))?;
    let f = |t: &Tensor| max_pool(&relu(t)).expect("even size");
    let (out, arg) = f(&x);
    let up = randn(&mut r, out.data.len());
    let ro = relu(&x);
    let g = relu_backward(
        &ro,
        &max_pool_backward(
            x.shape(),
            &arg,
            &Tensor {
                data: up.clone(),
                ..out
            },
        ),
    );
    let mut xs = x.data.clone();
    let a = audit(&mut xs, &g.data, |v| {
        dot(
            &f(&Tensor {
                data: v.to_vec(),
                ..x.clone()
            })
            .0
            .data,
            &up,
        )
    });
    Ok(report("relu+max_pool", &[a]))
}

pub fn check_dense(seed: u64) -> Result<GradReport> {
    let mut r = rng::rng_for(seed, "gradcheck-dense");
    let x = Tensor::from_vec(3, 2, 2, 2, randn(&mut r, 24))?;
    let mut d = Dense::new(8, 2, &mut r);
    d.bias.value = randn(&mut r, 2);
    d.weight.zero_grad();
    d.bias.zero_grad();
    let labels = [1u8, 0, 1];
    let lossf = |d: &mut Dense, t: &Tensor| {
        let z = d.forward(t, false).expect("checked");
        cross_entropy(&z, &labels, 2).0
    };
    let z = d.forward(&x, true)?;
    let (_, gz) = cross_entropy(&z, &labels, 2);
    let g = d.backward(&gz, x.shape());
    let base = d.clone();
    let mut xs = x.data.clone();
    let a = audit(&mut xs, &g.data, |v| {
        lossf(
            &mut base.clone(),
            &Tensor {
                data: v.to_vec(),
                ..x.clone()
            },
        )
    });
    let mut ws = base.weight.value.clone();
    let b = audit(&mut ws, &base.weight.grad, |v| {
        let mut dd = base.clone();
        dd.weight.value = v.to_vec();
        lossf(&mut dd, &x)
    });
    let mut bs = base.bias.value.clone();
    let c = audit(&mut bs, &base.bias.grad, |v| {
        let mut dd = base.clone();
        dd.bias.value = v.to_vec();
        lossf(&mut dd, &x)
    });
    Ok(report("dense+softmax_ce", &[a, b, c]))
}

/// Cross-entropy plus L2 penalty of a model on a fixed batch, with the
/// dropout mask pinned by reseeding.
fn model_loss(model: &mut CnnModel, x: &Tensor, labels: &[u8], seed: u64) -> f64 {
    let mut r = rng::rng_for(seed, "gradcheck-dropout");
    let z = model
        .forward(x, Mode::Train, Some(&mut r))
        .expect("shape checked");
    let y: Vec<u8> = labels.iter().map(|&l| class_index(l)).collect();
    let pen: f64 = {
        let l2 = model.config.l2;
        model
            .params_mut()
            .iter()
            .filter(|p| p.decay)
            .map(|p| 0.5 * l2 * p.value.iter().map(|w| w * w).sum::<f64>())
            .sum()
    };
    cross_entropy(&z, &y, 2).0 + pen
}

/// End-to-end audit on a small network over all parameters.
pub fn check_model(config: CnnConfig, side: usize, batch: usize, seed: u64) -> Result<GradReport> {
    let mut r = rng::rng_for(seed, "gradcheck-model");
    let x = Tensor::from_vec(
        batch,
        side,
        side,
        3,
        (0..batch * side * side * 3).map(|_| r.random()).collect(),
    )?;
    let labels: Vec<u8> = (0..batch).map(|i| (i % 2) as u8).collect();
    let mut model = CnnModel::new(config, side, seed)?;
    model.zero_grad();
    let mut dr = rng::rng_for(seed, "gradcheck-dropout");
    let z = model.forward(&x, Mode::Train, Some(&mut dr))?;
    let y: Vec<u8> = labels.iter().map(|&l| class_index(l)).collect();
    let (_, gz) = cross_entropy(&z, &y, 2);
    model.backward(&gz);
    model.apply_l2();
    let analytic: Vec<Vec<f64>> = model.params_mut().iter().map(|p| p.grad.clone()).collect();
    let mut parts = Vec::new();
    let n_params = analytic.len();
    for pi in 0..n_params {
        let mut vals = model.params_mut()[pi].value.clone();
        let base = model.clone();
        parts.push(audit(&mut vals, &analytic[pi], |v| {
            let mut m = base.clone();
            m.params_mut()[pi].value = v.to_vec();
            model_loss(&mut m, &x, &labels, seed)
        }));
    }
    Ok(report(&format!("model(depth {})", config.depth), &parts))
}

/// Small reference network for the end-to-end audit.
pub fn tiny_config() -> CnnConfig {
    CnnConfig {
        depth: 1,
        filter_sizes: [3, 3, 3],
        num_filters: [2, 2, 2],
        dropout: 0.0,
        initial_lr: 1e-2,
        l2: 1e-3,
        batch_size: 4,
        momentum: 0.9,
    }
}

/// Every layer check plus end-to-end checks on small models.
pub fn run_all(seed: u64) -> Result<Vec<GradReport>> {
    let mut out = vec![
        check_conv(3, seed)?,
        check_conv(2, seed)?,
        check_conv(1, seed)?,
        check_batch_norm(seed)?,
        check_relu_pool(seed)?,
        check_dense(seed)?,
        check_model(tiny_config(), 8, 4, seed)?,
    ];
    let deeper = CnnConfig {
        depth: 3,
        filter_sizes: [3, 2, 3],
        num_filters: [2, 3, 2],
        dropout: 0.3,
        ..tiny_config()
    };
    out.push(check_model(deeper, 16, 4, seed)?);
    Ok(out)
}
