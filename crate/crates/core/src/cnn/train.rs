use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::{cross_entropy, Mode, Tensor};
use super::model::{class_index, CnnConfig, CnnModel, EpochRecord, CHANNELS};
use crate::cv::{accuracy, crossval, stratified_folds, CvConfig, CvResult};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng;

/// Labeled square RGB images flattened to NHWC rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub side: usize,
    pub pixels: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(images: &[&Image], labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::invalid("images and labels differ in length"));
        }
        let side = images.first().map(|i| i.width).unwrap_or(0);
        let mut pixels = Vec::with_capacity(images.len() * side * side * CHANNELS);
        for img in images {
            if img.width != side || img.height != side {
                return Err(Error::invalid("images must share one square size"));
            }
            pixels.extend(img.data.iter().map(|&v| v as f64));
        }
        Ok(Self {
            side,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn item_len(&self) -> usize {
        self.side * self.side * CHANNELS
    }

    pub fn batch(&self, idx: &[usize]) -> Tensor {
        let l = self.item_len();
        let mut data = Vec::with_capacity(idx.len() * l);
        for &i in idx {
            data.extend_from_slice(&self.pixels[i * l..(i + 1) * l]);
        }
        Tensor {
            n: idx.len(),
            h: self.side,
            w: self.side,
            c: CHANNELS,
            data,
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            side: self.side,
            pixels: self.batch(idx).data,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Learning rate is multiplied by 0.1 every this many epochs.
    pub lr_decay_every: usize,
    /// Validations without improvement before stopping.
    pub patience: usize,
    /// Share of a training fold held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 30,
            lr_decay_every: 10,
            patience: 3,
            val_fraction: 0.1,
        }
    }
}

/// `v <- momentum * v - lr * g; w <- w + v`.
pub fn sgd_step(value: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    for ((w, g), v) in value.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *w += *v;
    }
}

const SCORE_CHUNK: usize = 128;

/// Mirror-class probabilities for every image of the set.
pub fn score_set(model: &mut CnnModel, set: &ImageSet) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in idx.chunks(SCORE_CHUNK) {
        out.extend(model.scores(&set.batch(chunk))?);
    }
    Ok(out)
}

/// Minibatch SGD with step decay, per-epoch validation and early stopping.
/// Returns the best-validation snapshot carrying the full history.
pub fn train(
    config: &CnnConfig,
    tc: &TrainConfig,
    train_set: &ImageSet,
    val_set: &ImageSet,
    seed: u64,
) -> Result<CnnModel> {
    if train_set.len() < 2 || val_set.is_empty() {
        return Err(Error::invalid(
            "need at least two training and one validation image",
        ));
    }
    if train_set.side != val_set.side {
        return Err(Error::invalid("train and validation image sizes differ"));
    }
    let mut model = CnnModel::new(*config, train_set.side, seed)?;
    let mut r = rng::rng_for(seed, "cnn-train");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<CnnModel> = None;
    let mut best_acc = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut iteration = 0usize;
    let bs = config.batch_size.min(train_set.len());
    for epoch in 0..tc.max_epochs {
        let lr = config.initial_lr * 0.1f64.powi((epoch / tc.lr_decay_every.max(1)) as i32);
        order.shuffle(&mut r);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(bs) {
            if chunk.len() < 2 {
                continue;
            }
            let x = train_set.batch(chunk);
            let y: Vec<u8> = chunk
                .iter()
                .map(|&i| class_index(train_set.labels[i]))
                .collect();
            model.zero_grad();
            let logits = model.forward(&x, Mode::Train, Some(&mut r))?;
            let (ce, dlogits) = cross_entropy(&logits, &y, 2);
            model.backward(&dlogits);
            let loss = ce + model.apply_l2();
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { iteration, loss });
            }
            for p in model.params_mut() {
                sgd_step(&mut p.value, &p.grad, &mut p.velocity, lr, config.momentum);
            }
            if !model.is_finite() {
                return Err(Error::TrainingDiverged {
                    iteration,
                    loss: f64::NAN,
                });
            }
            loss_sum += loss;
            batches += 1;
            iteration += 1;
        }
        let val_scores = score_set(&mut model, val_set)?;
        let acc = accuracy(&val_scores, &val_set.labels);
        if acc > best_acc {
            best_acc = acc;
            best = Some(model.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches.max(1) as f64,
            val_accuracy: acc,
            best_val_accuracy: best_acc,
        });
        log::debug!(
            "epoch {epoch}: loss {:.4} val {acc:.3}",
            loss_sum / batches.max(1) as f64
        );
        if stale >= tc.patience {
            break;
        }
    }
    let mut out = best.unwrap_or(model);
    out.history = history;
    Ok(out)
}

/// Split training indices into train and validation parts, stratified.
pub fn holdout_split(
    labels: &[u8],
    idx: &[usize],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng::rng(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut c: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| labels[i] == class)
            .collect();
        c.shuffle(&mut r);
        let nv = if c.len() < 2 {
            0
        } else {
            ((c.len() as f64 * fraction).round() as usize).clamp(1, c.len() - 1)
        };
        val.extend_from_slice(&c[..nv]);
        train.extend_from_slice(&c[nv..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Train one network per fold per instance and average held-out scores.
pub fn cnn_crossval(
    config: &CnnConfig,
    tc: &TrainConfig,
    set: &ImageSet,
    instances: usize,
    seed: u64,
) -> Result<CvResult> {
    let cv = CvConfig {
        repetitions: instances,
        folds: 2,
        seed,
    };
    let mut fold = 0u64;
    crossval(&set.labels, &cv, |rep, train_idx, test_idx| {
        let s = rng::derive(rng::derive(seed, rep as u64), fold);
        fold += 1;
        let (tr, va) = holdout_split(&set.labels, train_idx, tc.val_fraction, s);
        let mut model = train(config, tc, &set.subset(&tr), &set.subset(&va), s)?;
        score_set(&mut model, &set.subset(test_idx))
    })
}

/// Train on a fresh stratified split of `set` and return the model with the
/// test indices it never saw.
pub fn train_on_split(
    config: &CnnConfig,
    tc: &TrainConfig,
    set: &ImageSet,
    seed: u64,
) -> Result<(CnnModel, Vec<usize>)> {
    let folds = stratified_folds(&set.labels, 2, seed);
    let (tr, va) = holdout_split(
        &set.labels,
        &folds[0],
        tc.val_fraction,
        rng::derive(seed, 1),
    );
    let model = train(config, tc, &set.subset(&tr), &set.subset(&va), seed)?;
    Ok((model, folds[1].clone()))
}
