//! Layers with explicit forward/backward passes over NHWC tensors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            n,
            h,
            w,
            c,
            data: vec![0.0; n * h * w * c],
        }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * h * w * c {
            return Err(Error::invalid(format!(
                "tensor data has {} values, shape needs {}",
                data.len(),
                n * h * w * c
            )));
        }
        Ok(Self { n, h, w, c, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.h, self.w, self.c]
    }

    /// Values belonging to batch item `i`.
    pub fn item(&self, i: usize) -> &[f64] {
        let s = self.h * self.w * self.c;
        &self.data[i * s..(i + 1) * s]
    }

    fn same_shape(&self) -> Self {
        Self::zeros(self.n, self.h, self.w, self.c)
    }
}

/// A trainable array with its gradient and momentum buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
    #[serde(skip)]
    pub velocity: Vec<f64>,
    /// Whether the L2 penalty applies.
    pub decay: bool,
}

impl Param {
    pub fn new(value: Vec<f64>, decay: bool) -> Self {
        let n = value.len();
        Self {
            value,
            grad: vec![0.0; n],
            velocity: vec![0.0; n],
            decay,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
        self.grad.resize(self.value.len(), 0.0);
        if self.velocity.len() != self.value.len() {
            self.velocity = vec![0.0; self.value.len()];
        }
    }
}

fn he_normal(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let s = (2.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * s)
        .collect()
}

/// Stride-1 same-padded cross-correlation; weights laid out
/// `[ky][kx][cin][cout]`. Even kernels pad one more row/column after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub k: usize,
    pub cin: usize,
    pub cout: usize,
    pub weight: Param,
    pub bias: Param,
    #[serde(skip)]
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(k: usize, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            k,
            cin,
            cout,
            weight: Param::new(he_normal(rng, k * k * cin * cout, k * k * cin), true),
            bias: Param::new(vec![0.0; cout], false),
            input: None,
        }
    }

    pub fn from_weights(
        k: usize,
        cin: usize,
        cout: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weight.len() != k * k * cin * cout || bias.len() != cout {
            return Err(Error::invalid("convolution weight/bias shape mismatch"));
        }
        Ok(Self {
            k,
            cin,
            cout,
            weight: Param::new(weight, true),
            bias: Param::new(bias, false),
            input: None,
        })
    }

    fn pad(&self) -> isize {
        ((self.k - 1) / 2) as isize
    }

    /// Patch matrix of item `n`: one row per output pixel, columns in
    /// weight order `[ky][kx][cin]`, zeros outside the image.
    fn im2col(&self, x: &Tensor, n: usize, col: &mut [f64]) {
        let (k, cin) = (self.k, self.cin);
        let (h, w) = (x.h as isize, x.w as isize);
        let pad = self.pad();
        let kk = k * k * cin;
        let img = x.item(n);
        for oy in 0..h {
            for ox in 0..w {
                let row = &mut col[(oy * w + ox) as usize * kk..][..kk];
                for ky in 0..k {
                    let iy = oy + ky as isize - pad;
                    for kx in 0..k {
                        let ix = ox + kx as isize - pad;
                        let dst = &mut row[(ky * k + kx) * cin..][..cin];
                        if iy < 0 || iy >= h || ix < 0 || ix >= w {
                            dst.fill(0.0);
                        } else {
                            let i = (iy * w + ix) as usize * cin;
                            dst.copy_from_slice(&img[i..i + cin]);
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add a patch-matrix gradient back onto item `n` of `gx`.
    fn col2im(&self, col: &[f64], n: usize, gx: &mut Tensor) {
        let (k, cin) = (self.k, self.cin);
        let (h, w) = (gx.h as isize, gx.w as isize);
        let pad = self.pad();
        let kk = k * k * cin;
        let s = gx.h * gx.w * cin;
        let img = &mut gx.data[n * s..(n + 1) * s];
        for oy in 0..h {
            for ox in 0..w {
                let row = &col[(oy * w + ox) as usize * kk..][..kk];
                for ky in 0..k {
                    let iy = oy + ky as isize - pad;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = ox + kx as isize - pad;
                        if ix < 0 || ix >= w {
                            continue;
                        }
                        let i = (iy * w + ix) as usize * cin;
                        for (d, v) in img[i..i + cin]
                            .iter_mut()
                            .zip(&row[(ky * k + kx) * cin..][..cin])
                        {
                            *d += v;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: &Tensor, keep: bool) -> Result<Tensor> {
        if x.c != self.cin {
            return Err(Error::invalid(format!(
                "conv expects {} channels, got {}",
                self.cin, x.c
            )));
        }
        if x.h < self.k || x.w < self.k {
            return Err(Error::invalid("kernel larger than input"));
        }
        let cout = self.cout;
        let p = x.h * x.w;
        let kk = self.k * self.k * self.cin;
        let mut out = Tensor::zeros(x.n, x.h, x.w, cout);
        let mut col = vec![0.0; p * kk];
        for n in 0..x.n {
            self.im2col(x, n, &mut col);
            let o = &mut out.data[n * p * cout..(n + 1) * p * cout];
            for px in o.chunks_exact_mut(cout) {
                px.copy_from_slice(&self.bias.value);
            }
            // out (p x cout) += col (p x kk) * W (kk x cout)
            unsafe {
                matrixmultiply::dgemm(
                    p,
                    kk,
                    cout,
                    1.0,
                    col.as_ptr(),
                    kk as isize,
                    1,
                    self.weight.value.as_ptr(),
                    cout as isize,
                    1,
                    1.0,
                    o.as_mut_ptr(),
                    cout as isize,
                    1,
                );
            }
        }
        if keep {
            self.input = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, g: &Tensor) -> Tensor {
        let x = self.input.take().expect("conv backward without forward");
        let cout = self.cout;
        let p = x.h * x.w;
        let kk = self.k * self.k * self.cin;
        let mut gx = x.same_shape();
        let mut col = vec![0.0; p * kk];
        let mut gcol = vec![0.0; p * kk];
        for n in 0..x.n {
            let go = &g.data[n * p * cout..(n + 1) * p * cout];
            for px in go.chunks_exact(cout) {
                for (b, v) in self.bias.grad.iter_mut().zip(px) {
                    *b += v;
                }
            }
            self.im2col(&x, n, &mut col);
            // gW (kk x cout) += col^T * g, gcol (p x kk) = g * W^T
            unsafe {
                matrixmultiply::dgemm(
                    kk,
                    p,
                    cout,
                    1.0,
                    col.as_ptr(),
                    1,
                    kk as isize,
                    go.as_ptr(),
                    cout as isize,
                    1,
                    1.0,
                    self.weight.grad.as_mut_ptr(),
                    cout as isize,
                    1,
                );
                matrixmultiply::dgemm(
                    p,
                    cout,
                    kk,
                    1.0,
                    go.as_ptr(),
                    cout as isize,
                    1,
                    self.weight.value.as_ptr(),
                    1,
                    cout as isize,
                    0.0,
                    gcol.as_mut_ptr(),
                    kk as isize,
                    1,
                );
            }
            self.col2im(&gcol, n, &mut gx);
        }
        gx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub c: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    #[serde(skip)]
    cache: Option<(Vec<f64>, Vec<f64>, usize)>,
}

impl BatchNorm {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            gamma: Param::new(vec![1.0; c], false),
            beta: Param::new(vec![0.0; c], false),
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    /// Normalized values before scale and shift, per the current batch.
    pub fn normalize_batch(x: &Tensor, eps: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let c = x.c;
        let m = x.n * x.h * x.w;
        if x.n < 2 {
            return Err(Error::invalid(
                "batch norm in train mode needs a batch of at least 2",
            ));
        }
        let mut mean = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for (a, v) in mean.iter_mut().zip(px) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let mut var = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for ((a, v), mu) in var.iter_mut().zip(px).zip(&mean) {
                *a += (v - mu) * (v - mu);
            }
        }
        var.iter_mut().for_each(|v| *v /= m as f64);
        let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = x.data.clone();
        for px in xhat.chunks_exact_mut(c) {
            for ((v, mu), s) in px.iter_mut().zip(&mean).zip(&inv) {
                *v = (*v - mu) * s;
            }
        }
        Ok((xhat, mean, var))
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode, keep: bool) -> Result<Tensor> {
        if x.c != self.c {
            return Err(Error::invalid("batch norm channel mismatch"));
        }
        let c = self.c;
        let mut out = x.clone();
        match mode {
            Mode::Train => {
                let (xhat, mean, var) = Self::normalize_batch(x, self.eps)?;
                let m = (x.n * x.h * x.w) as f64;
                for ch in 0..c {
                    self.running_mean[ch] =
                        (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean[ch];
                    let unbiased = var[ch] * m / (m - 1.0);
                    self.running_var[ch] =
                        (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
                }
                for (o, xh) in out.data.chunks_exact_mut(c).zip(xhat.chunks_exact(c)) {
                    for ch in 0..c {
                        o[ch] = self.gamma.value[ch] * xh[ch] + self.beta.value[ch];
                    }
                }
                if keep {
                    let inv = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                    self.cache = Some((xhat, inv, x.n * x.h * x.w));
                }
            }
            Mode::Infer => {
                let scale: Vec<f64> = (0..c)
                    .map(|ch| self.gamma.value[ch] / (self.running_var[ch] + self.eps).sqrt())
                    .collect();
                for o in out.data.chunks_exact_mut(c) {
                    for ch in 0..c {
                        o[ch] = (o[ch] - self.running_mean[ch]) * scale[ch] + self.beta.value[ch];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, g: &Tensor) -> Tensor {
        let (xhat, inv, m) = self
            .cache
            .take()
            .expect("batch norm backward without train forward");
        let c = self.c;
        let mut sum_g = vec![0.0; c];
        let mut sum_gx = vec![0.0; c];
        for (gp, xp) in g.data.chunks_exact(c).zip(xhat.chunks_exact(c)) {
            for ch in 0..c {
                sum_g[ch] += gp[ch];
                sum_gx[ch] += gp[ch] * xp[ch];
            }
        }
        for ch in 0..c {
            self.beta.grad[ch] += sum_g[ch];
            self.gamma.grad[ch] += sum_gx[ch];
        }
        let mf = m as f64;
        let mut gx = g.clone();
        for (o, xp) in gx.data.chunks_exact_mut(c).zip(xhat.chunks_exact(c)) {
            for ch in 0..c {
                let k = self.gamma.value[ch] * inv[ch] / mf;
                o[ch] = k * (mf * o[ch] - sum_g[ch] - xp[ch] * sum_gx[ch]);
            }
        }
        gx
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut o = x.clone();
    o.data.iter_mut().for_each(|v| *v = v.max(0.0));
    o
}

/// Gradient through ReLU given its output.
pub fn relu_backward(out: &Tensor, g: &Tensor) -> Tensor {
    let mut gx = g.clone();
    for (v, o) in gx.data.iter_mut().zip(&out.data) {
        if *o <= 0.0 {
            *v = 0.0;
        }
    }
    gx
}

/// 2x2 stride-2 max pooling; returns the output and argmax indices.
pub fn max_pool(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    if !x.h.is_multiple_of(2) || !x.w.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "cannot pool odd spatial size {}x{}",
            x.h, x.w
        )));
    }
    let (oh, ow, c) = (x.h / 2, x.w / 2, x.c);
    let mut out = Tensor::zeros(x.n, oh, ow, c);
    let mut arg = vec![0usize; out.data.len()];
    for n in 0..x.n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut bi = 0;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let i = ((n * x.h + 2 * oy + dy) * x.w + 2 * ox + dx) * c + ch;
                        if x.data[i] > best {
                            best = x.data[i];
                            bi = i;
                        }
                    }
                    let o = ((n * oh + oy) * ow + ox) * c + ch;
                    out.data[o] = best;
                    arg[o] = bi;
                }
            }
        }
    }
    Ok((out, arg))
}

pub fn max_pool_backward(input_shape: [usize; 4], arg: &[usize], g: &Tensor) -> Tensor {
    let [n, h, w, c] = input_shape;
    let mut gx = Tensor::zeros(n, h, w, c);
    for (gi, &src) in g.data.iter().zip(arg) {
        gx.data[src] += gi;
    }
    gx
}

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// `1/(1-rate)`. Returns the output and the multiplicative mask.
pub fn dropout(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> (Tensor, Option<Vec<f64>>) {
    if mode == Mode::Infer || rate <= 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 - rate;
    let mask: Vec<f64> = (0..x.data.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                1.0 / keep
            }
        })
        .collect();
    let mut o = x.clone();
    for (v, m) in o.data.iter_mut().zip(&mask) {
        *v *= m;
    }
    (o, Some(mask))
}

/// Fully connected layer on flattened items; weights `[in][out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weight: Param,
    pub bias: Param,
    #[serde(skip)]
    cache: Option<Vec<f64>>,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            input,
            output,
            weight: Param::new(he_normal(rng, input * output, input), true),
            bias: Param::new(vec![0.0; output], false),
            cache: None,
        }
    }

    /// Returns `[batch][output]` logits.
    pub fn forward(&mut self, x: &Tensor, keep: bool) -> Result<Vec<f64>> {
        let d = x.h * x.w * x.c;
        if d != self.input {
            return Err(Error::invalid(format!(
                "dense expects {} inputs, got {d}",
                self.input
            )));
        }
        let mut out = vec![0.0; x.n * self.output];
        for n in 0..x.n {
            let o = &mut out[n * self.output..(n + 1) * self.output];
            o.copy_from_slice(&self.bias.value);
            for (i, &xv) in x.item(n).iter().enumerate() {
                let row = &self.weight.value[i * self.output..(i + 1) * self.output];
                for (a, w) in o.iter_mut().zip(row) {
                    *a += xv * w;
                }
            }
        }
        if keep {
            self.cache = Some(x.data.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, g: &[f64], shape: [usize; 4]) -> Tensor {
        let x = self.cache.take().expect("dense backward without forward");
        let [n, h, w, c] = shape;
        let d = h * w * c;
        let mut gx = Tensor::zeros(n, h, w, c);
        for b in 0..n {
            let go = &g[b * self.output..(b + 1) * self.output];
            for (gb, v) in self.bias.grad.iter_mut().zip(go) {
                *gb += v;
            }
            for i in 0..d {
                let xv = x[b * d + i];
                let r = i * self.output;
                let mut s = 0.0;
                for o in 0..self.output {
                    self.weight.grad[r + o] += xv * go[o];
                    s += self.weight.value[r + o] * go[o];
                }
                gx.data[b * d + i] = s;
            }
        }
        gx
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &[f64], labels: &[u8], classes: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut loss = 0.0;
    let mut g = vec![0.0; logits.len()];
    for (b, &y) in labels.iter().enumerate() {
        let z = &logits[b * classes..(b + 1) * classes];
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[y as usize];
        for k in 0..classes {
            let p = (z[k] - lse).exp();
            g[b * classes + k] = (p - if k == y as usize { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (loss / n as f64, g)
}
