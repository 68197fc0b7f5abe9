use crate::cnn::{score_set, train_on_split, CnnConfig, CnnModel, ImageSet, TrainConfig};
use crate::cv::accuracy;
use crate::error::{Error, Result};
use crate::stats::pearson;

use super::bhs::Outcome;

/// Trains a configuration on rendered images and scores it by correlation
/// with reference judgments on a held-out benchmark set.
#[derive(Debug, Clone)]
pub struct CnnObjective {
    pub train: ImageSet,
    pub benchmark: ImageSet,
    /// Mean human (or simulated) rating per benchmark image.
    pub reference: Vec<f64>,
    pub train_config: TrainConfig,
    /// Fixes the split and initialization across search iterations.
    pub seed: u64,
}

impl CnnObjective {
    pub fn new(
        train: ImageSet,
        benchmark: ImageSet,
        reference: Vec<f64>,
        train_config: TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        if benchmark.len() != reference.len() {
            return Err(Error::invalid(
                "benchmark images and reference ratings differ in length",
            ));
        }
        Ok(Self {
            train,
            benchmark,
            reference,
            train_config,
            seed,
        })
    }

    /// Train on a split drawn from `seed`; returns the model, its test
    /// accuracy and its benchmark correlation (0 when undefined).
    pub fn fit(&self, config: &CnnConfig, seed: u64) -> Result<(CnnModel, f64, f64)> {
        let (mut model, test) = train_on_split(config, &self.train_config, &self.train, seed)?;
        let test_set = self.train.subset(&test);
        let acc = accuracy(&score_set(&mut model, &test_set)?, &test_set.labels);
        let scores = score_set(&mut model, &self.benchmark)?;
        let r = match pearson(&scores, &self.reference) {
            Ok(r) => r,
            Err(Error::UndefinedCorrelation(_)) => 0.0,
            Err(e) => return Err(e),
        };
        Ok((model, acc, r))
    }

    pub fn evaluate(&self, config: &CnnConfig) -> Result<Outcome> {
        match self.fit(config, self.seed) {
            Ok((model, acc, r)) => Ok(Outcome::Value {
                objective: r,
                accuracy: Some(acc),
                epochs: Some(model.history.len()),
            }),
            Err(Error::TrainingDiverged { .. }) => Ok(Outcome::Diverged),
            Err(e) => Err(e),
        }
    }
}
