use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, ImageStage};
use crate::rng;
use crate::stats::pearson;

pub const DEFAULT_SIGMAS: [f64; 4] = [1e-3, 1e-2, 1e-1, 1e0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCurve {
    pub sigmas: Vec<f64>,
    /// Correlation with the reference at each sigma; 0 where undefined.
    pub correlations: Vec<f64>,
    /// Predictions were constant at this sigma, so no correlation exists.
    pub undefined: Vec<bool>,
    pub clean_correlation: f64,
}

impl NoiseCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sigma,correlation,undefined\n");
        s.push_str(&format!("0,{},false\n", self.clean_correlation));
        for ((sg, r), u) in self
            .sigmas
            .iter()
            .zip(&self.correlations)
            .zip(&self.undefined)
        {
            s.push_str(&format!("{sg},{r},{u}\n"));
        }
        s
    }
}

/// Copy of `img` with N(0, sigma^2) added per channel, clamped to [0, 1].
pub fn perturb(img: &Image, sigma: f64, r: &mut impl Rng) -> Image {
    let mut out = img.clone();
    for v in &mut out.data {
        let e: f64 = r.sample(StandardNormal);
        *v = (*v as f64 + sigma * e).clamp(0.0, 1.0) as f32;
    }
    out
}

/// Correlation between `score`'s predictions on noisy copies of `images` and
/// the fixed clean-image `reference`, per sigma.
pub fn noise_robustness(
    mut score: impl FnMut(&[Image]) -> Result<Vec<f64>>,
    images: &[Image],
    sigmas: &[f64],
    reference: &[f64],
    seed: u64,
) -> Result<NoiseCurve> {
    if images.len() != reference.len() {
        return Err(Error::invalid(
            "images and reference scores differ in length",
        ));
    }
    if images.iter().any(|i| i.stage != ImageStage::Display) {
        return Err(Error::invalid("noise curves need display-range images"));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sigmas must be positive and ascending"));
    }
    let clean_correlation = pearson(&score(images)?, reference)?;
    let (mut correlations, mut undefined) = (Vec::new(), Vec::new());
    for (k, &sigma) in sigmas.iter().enumerate() {
        let mut r = rng::rng(rng::derive(rng::derive_str(seed, "noise"), k as u64));
        let noisy: Vec<Image> = images.iter().map(|i| perturb(i, sigma, &mut r)).collect();
        match pearson(&score(&noisy)?, reference) {
            Ok(c) => {
                correlations.push(c);
                undefined.push(false);
            }
            Err(Error::UndefinedCorrelation(_)) => {
                correlations.push(0.0);
                undefined.push(true);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(NoiseCurve {
        sigmas: sigmas.to_vec(),
        correlations,
        undefined,
        clean_correlation,
    })
}
