//! Small convolutional classifiers trained from scratch on 64x64 RGB stimuli.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod train;

#[cfg(test)]
mod tests;

pub use layers::{Mode, Tensor};
pub use model::{class_index, CnnConfig, CnnModel, EpochRecord, CHANNELS, INPUT_SIZE};
pub use train::{
    cnn_crossval, holdout_split, score_set, sgd_step, train, train_on_split, ImageSet, TrainConfig,
};
