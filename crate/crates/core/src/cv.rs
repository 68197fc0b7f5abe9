//! Repeated stratified k-fold cross-validation shared by every classifier.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            repetitions: 10,
            folds: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean held-out score per item.
    pub scores: Vec<f64>,
    /// `per_repetition[r][i]`: the held-out score of item `i` in repetition `r`.
    pub per_repetition: Vec<Vec<f64>>,
    /// Accuracy of each repetition's held-out scores.
    pub accuracy: Vec<f64>,
}

impl CvResult {
    pub fn mean_accuracy(&self) -> f64 {
        crate::stats::mean(&self.accuracy)
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::rng(seed);
    let mut out = vec![Vec::new(); folds];
    let mut slot = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut r);
        for i in idx {
            out[slot % folds].push(i);
            slot += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Fraction of items whose score falls on the side of 0.5 matching the
/// label; a score of exactly 0.5 is wrong for both classes.
pub fn accuracy(scores: &[f64], labels: &[u8]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| (**l == 1 && **s > 0.5) || (**l == 0 && **s < 0.5))
        .count();
    correct as f64 / scores.len() as f64
}

/// Run `fit_predict(repetition, train, test)` for every fold of every
/// repetition. It must return one score per test index.
pub fn crossval<F>(labels: &[u8], config: &CvConfig, mut fit_predict: F) -> Result<CvResult>
where
    F: FnMut(usize, &[usize], &[usize]) -> Result<Vec<f64>>,
{
    if config.folds < 2 || config.repetitions == 0 {
        return Err(Error::invalid("need >= 2 folds and >= 1 repetition"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 (glass) or 1 (mirror)"));
    }
    for class in [0u8, 1] {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < config.folds {
            return Err(Error::invalid(format!(
                "class {class} has {n} items, too few for {} folds",
                config.folds
            )));
        }
    }
    let n = labels.len();
    let mut per_repetition = Vec::with_capacity(config.repetitions);
    let mut acc = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let folds = stratified_folds(labels, config.folds, rng::derive(config.seed, rep as u64));
        let mut scores = vec![f64::NAN; n];
        for (k, test) in folds.iter().enumerate() {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let s = fit_predict(rep, &train, test)?;
            if s.len() != test.len() {
                return Err(Error::invalid("fold model returned wrong number of scores"));
            }
            for (&i, v) in test.iter().zip(s) {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!("score {v} outside [0, 1]")));
                }
                scores[i] = v;
            }
        }
        acc.push(accuracy(&scores, labels));
        per_repetition.push(scores);
    }
    let scores = (0..n)
        .map(|i| per_repetition.iter().map(|r| r[i]).sum::<f64>() / config.repetitions as f64)
        .collect();
    Ok(CvResult {
        scores,
        per_repetition,
        accuracy: acc,
    })
}
