//! Mirror/glass material-perception workbench.

pub mod cnn;
pub mod cv;
pub mod error;
pub mod expserve;
pub mod features;
pub mod funnel;
pub mod image;
pub mod rng;
pub mod rsa;
pub mod search;
pub mod shallow;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use image::{Image, ImageStage};
