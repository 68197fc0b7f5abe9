//! Hand-engineered image features: color-moment statistics, steerable
//! pyramid texture statistics, z-scoring and PCA.

pub mod color;
pub mod fft2;
pub mod ps;
pub mod pyramid;
pub mod table;
pub mod transform;

pub use color::{color_hist_features, luminance_saturation};
pub use ps::{PsConfig, PsExtractor};
pub use pyramid::{Pyramid, PyramidBuilder};
pub use table::{FeatureKind, FeatureTable};
pub use transform::{pca_fit, zscore_fit, PcaModel, ZScoreModel};
