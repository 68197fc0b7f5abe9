use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    dropout, max_pool, max_pool_backward, relu, relu_backward, softmax, BatchNorm, Conv2d, Dense,
    Mode, Param, Tensor,
};
use crate::error::{Error, Result};
use crate::rng;

pub const INPUT_SIZE: usize = 64;
pub const CHANNELS: usize = 3;

/// Architecture and optimizer hyperparameters of a block network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub depth: usize,
    pub filter_sizes: [usize; 3],
    pub num_filters: [usize; 3],
    pub dropout: f64,
    pub initial_lr: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub momentum: f64,
}

impl Default for CnnConfig {
    /// Named reference configuration.
    fn default() -> Self {
        Self {
            depth: 3,
            filter_sizes: [3, 3, 3],
            num_filters: [8, 16, 16],
            dropout: 0.2,
            initial_lr: 1e-2,
            l2: 1e-4,
            batch_size: 256,
            momentum: 0.9,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=12).contains(&self.depth) {
            return Err(Error::invalid(format!(
                "depth {} outside 1..=12",
                self.depth
            )));
        }
        if self.filter_sizes.iter().any(|&k| k < 1) || self.num_filters.iter().any(|&f| f < 1) {
            return Err(Error::invalid("filter sizes and counts must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        if !(self.initial_lr > 0.0) || !(self.l2 >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("bad learning rate, L2 factor or momentum"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be at least 2"));
        }
        Ok(())
    }

    /// `(filter_size, num_filters)` of block `i`: the last block uses pair 3,
    /// the one before it pair 2, all earlier blocks pair 1.
    pub fn block_spec(&self, i: usize) -> (usize, usize) {
        let n = self.depth;
        let pair = if i + 1 == n {
            2
        } else if i + 2 == n {
            1
        } else {
            0
        };
        (self.filter_sizes[pair], self.num_filters[pair])
    }

    /// Pooling happens only in the last `min(depth, 3)` blocks.
    pub fn pooled(&self, i: usize) -> bool {
        i + self.depth.min(3) >= self.depth
    }

    pub fn output_side(&self, input: usize) -> usize {
        input >> self.depth.min(3)
    }

    pub fn param_count(&self, input: usize) -> usize {
        let mut cin = CHANNELS;
        let mut total = 0;
        for i in 0..self.depth {
            let (k, f) = self.block_spec(i);
            total += k * k * cin * f + f + 2 * f;
            cin = f;
        }
        let side = self.output_side(input);
        total + side * side * cin * 2 + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub best_val_accuracy: f64,
}

#[derive(Debug, Clone)]
struct BlockCache {
    relu_out: Tensor,
    pool: Option<([usize; 4], Vec<usize>)>,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub conv: Conv2d,
    pub bn: BatchNorm,
    pub pool: bool,
    cache: Option<BlockCache>,
}

#[derive(Debug, Clone)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub input_size: usize,
    pub seed: u64,
    pub blocks: Vec<Block>,
    pub fc: Dense,
    pub history: Vec<EpochRecord>,
    dropout_mask: Option<Vec<f64>>,
    fc_shape: [usize; 4],
}

/// Output unit 0 is "mirror", unit 1 "glass".
pub fn class_index(label: u8) -> u8 {
    1 - label
}

impl CnnModel {
    pub fn new(config: CnnConfig, input_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let levels = config.depth.min(3);
        if !input_size.is_multiple_of(1 << levels) || input_size >> levels == 0 {
            return Err(Error::invalid(format!(
                "input side {input_size} must be divisible by {}",
                1 << levels
            )));
        }
        let mut r = rng::rng_for(seed, "cnn-init");
        let mut cin = CHANNELS;
        let mut blocks = Vec::with_capacity(config.depth);
        for i in 0..config.depth {
            let (k, f) = config.block_spec(i);
            blocks.push(Block {
                conv: Conv2d::new(k, cin, f, &mut r),
                bn: BatchNorm::new(f),
                pool: config.pooled(i),
                cache: None,
            });
            cin = f;
        }
        let side = config.output_side(input_size);
        let fc = Dense::new(side * side * cin, 2, &mut r);
        Ok(Self {
            config,
            input_size,
            seed,
            blocks,
            fc,
            history: Vec::new(),
            dropout_mask: None,
            fc_shape: [0; 4],
        })
    }

    pub fn param_count(&self) -> usize {
        let mut n = self.fc.weight.value.len() + self.fc.bias.value.len();
        for b in &self.blocks {
            n += b.conv.weight.value.len() + b.conv.bias.value.len();
            n += b.bn.gamma.value.len() + b.bn.beta.value.len();
        }
        n
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight);
            out.push(&mut b.conv.bias);
            out.push(&mut b.bn.gamma);
            out.push(&mut b.bn.beta);
        }
        out.push(&mut self.fc.weight);
        out.push(&mut self.fc.bias);
        out
    }

    fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([&b.conv.weight, &b.conv.bias, &b.bn.gamma, &b.bn.beta]);
        }
        out.extend([&self.fc.weight, &self.fc.bias]);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.h != self.input_size || x.w != self.input_size || x.c != CHANNELS {
            return Err(Error::invalid(format!(
                "expected {}x{}x{} input, got {}x{}x{}",
                self.input_size, self.input_size, CHANNELS, x.h, x.w, x.c
            )));
        }
        Ok(())
    }

    /// Logits `[batch][2]`. In train mode caches are kept for `backward`.
    pub fn forward(
        &mut self,
        x: &Tensor,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let train = mode == Mode::Train;
        let mut h = x.clone();
        for b in &mut self.blocks {
            let c = b.conv.forward(&h, train)?;
            let n = b.bn.forward(&c, mode, train)?;
            let r = relu(&n);
            if b.pool {
                let (p, arg) = max_pool(&r)?;
                if train {
                    b.cache = Some(BlockCache {
                        pool: Some((r.shape(), arg)),
                        relu_out: r,
                    });
                }
                h = p;
            } else {
                if train {
                    b.cache = Some(BlockCache {
                        relu_out: r.clone(),
                        pool: None,
                    });
                }
                h = r;
            }
        }
        if train && self.config.dropout > 0.0 {
            let r = rng.ok_or_else(|| Error::invalid("train mode with dropout needs an rng"))?;
            let (d, mask) = dropout(&h, self.config.dropout, mode, r);
            self.dropout_mask = mask;
            h = d;
        } else {
            self.dropout_mask = None;
        }
        self.fc_shape = h.shape();
        self.fc.forward(&h, train)
    }

    /// Accumulate parameter gradients from the gradient w.r.t. the logits.
    pub fn backward(&mut self, dlogits: &[f64]) -> Tensor {
        let mut g = self.fc.backward(dlogits, self.fc_shape);
        if let Some(mask) = self.dropout_mask.take() {
            for (v, m) in g.data.iter_mut().zip(&mask) {
                *v *= m;
            }
        }
        for b in self.blocks.iter_mut().rev() {
            let cache = b
                .cache
                .take()
                .expect("block backward without train forward");
            if let Some((shape, arg)) = &cache.pool {
                g = max_pool_backward(*shape, arg, &g);
            }
            g = relu_backward(&cache.relu_out, &g);
            g = b.bn.backward(&g);
            g = b.conv.backward(&g);
        }
        g
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Add `l2 * w` to the gradient of every decayed weight and return the
    /// penalty `l2/2 * sum(w^2)`.
    pub fn apply_l2(&mut self) -> f64 {
        let l2 = self.config.l2;
        let mut pen = 0.0;
        for p in self.params_mut() {
            if p.decay {
                for (g, w) in p.grad.iter_mut().zip(&p.value) {
                    *g += l2 * w;
                    pen += 0.5 * l2 * w * w;
                }
            }
        }
        pen
    }

    /// Mirror-class probability per item, inference mode.
    pub fn scores(&mut self, x: &Tensor) -> Result<Vec<f64>> {
        let logits = self.forward(x, Mode::Infer, None)?;
        Ok(logits.chunks(2).map(|z| softmax(z)[0]).collect())
    }

    /// Post-ReLU activation of every block, inference mode.
    pub fn activations(&mut self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut out = Vec::with_capacity(self.blocks.len());
        for b in &mut self.blocks {
            let c = b.conv.forward(&h, false)?;
            let r = relu(&b.bn.forward(&c, Mode::Infer, false)?);
            h = if b.pool { max_pool(&r)?.0 } else { r.clone() };
            out.push(r);
        }
        Ok(out)
    }

    fn buffers(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for b in &self.blocks {
            out.extend([
                b.conv.weight.value.as_slice(),
                &b.conv.bias.value,
                &b.bn.gamma.value,
                &b.bn.beta.value,
                &b.bn.running_mean,
                &b.bn.running_var,
            ]);
        }
        out.extend([self.fc.weight.value.as_slice(), &self.fc.bias.value]);
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.conv.weight.value);
            out.push(&mut b.conv.bias.value);
            out.push(&mut b.bn.gamma.value);
            out.push(&mut b.bn.beta.value);
            out.push(&mut b.bn.running_mean);
            out.push(&mut b.bn.running_var);
        }
        out.push(&mut self.fc.weight.value);
        out.push(&mut self.fc.bias.value);
        out
    }

    /// Versioned container: magic, version, JSON header length, JSON header,
    /// then every buffer as little-endian f32.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ModelHeader {
            config: self.config,
            input_size: self.input_size,
            seed: self.seed,
            history: self.history.clone(),
            shapes: self.buffers().iter().map(|b| b.len()).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(MODEL_MAGIC)?;
        f.write_all(&MODEL_VERSION.to_le_bytes())?;
        f.write_all(&(json.len() as u32).to_le_bytes())?;
        f.write_all(&json)?;
        for b in self.buffers() {
            for v in b {
                f.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = BufReader::new(File::open(path)?);
        let mut b4 = [0u8; 4];
        f.read_exact(&mut b4)?;
        if &b4 != MODEL_MAGIC {
            return Err(Error::format(path, "not a model file"));
        }
        f.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != MODEL_VERSION {
            return Err(Error::format(path, "unsupported model version"));
        }
        f.read_exact(&mut b4)?;
        let mut json = vec![0u8; u32::from_le_bytes(b4) as usize];
        f.read_exact(&mut json)?;
        let header: ModelHeader = serde_json::from_slice(&json)?;
        let mut model = CnnModel::new(header.config, header.input_size, header.seed)?;
        model.history = header.history;
        let expected: Vec<usize> = model.buffers().iter().map(|b| b.len()).collect();
        if expected != header.shapes {
            return Err(Error::format(
                path,
                "layer shapes do not match configuration",
            ));
        }
        for buf in model.buffers_mut() {
            let mut raw = vec![0u8; buf.len() * 4];
            f.read_exact(&mut raw)?;
            for (v, c) in buf.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            }
        }
        if !model.is_finite() {
            return Err(Error::format(path, "non-finite weights"));
        }
        Ok(model)
    }
}

const MODEL_MAGIC: &[u8; 4] = b"MGCN";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: CnnConfig,
    input_size: usize,
    seed: u64,
    history: Vec<EpochRecord>,
    shapes: Vec<usize>,
}
