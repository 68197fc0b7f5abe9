//! Dissimilarity matrices, second-order comparisons, scaling and the
//! evaluation statistics built on them.

pub mod mds;
pub mod noise;
pub mod rdm;
pub mod ttest;

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

pub use crate::cv::accuracy;
pub use mds::{classical_mds, kruskal_stress, procrustes_error, MdsResult};
pub use noise::{noise_robustness, perturb, NoiseCurve, DEFAULT_SIGMAS};
pub use rdm::{
    ccm, correlate_rdms, random_rdm, rdm_from_activations, rdm_from_scores, rdm_order, Rdm,
};
pub use ttest::{t_two_tailed_p, ttest, TTestMode, TTestResult};

use crate::error::{Error, Result};
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    /// Leave-one-out correlation per observer; `None` when undefined.
    pub per_observer: Vec<Option<f64>>,
    /// Mean over defined observers.
    pub mean: f64,
    /// Observers excluded because a correlation was undefined.
    pub excluded: Vec<usize>,
}

/// Correlate each observer with the mean of all the others.
/// `ratings[o][i]` is observer `o`'s rating of image `i`.
pub fn human_to_human(ratings: &[Vec<f64>]) -> Result<Consistency> {
    let m = ratings.len();
    if m < 3 {
        return Err(Error::InsufficientData(
            "need at least three observers".into(),
        ));
    }
    let n = ratings[0].len();
    if ratings.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("rating matrix is incomplete"));
    }
    let total: Vec<f64> = (0..n).map(|i| ratings.iter().map(|r| r[i]).sum()).collect();
    let mut per_observer = Vec::with_capacity(m);
    let mut excluded = Vec::new();
    for (o, r) in ratings.iter().enumerate() {
        let others: Vec<f64> = total
            .iter()
            .zip(r)
            .map(|(t, v)| (t - v) / (m - 1) as f64)
            .collect();
        match pearson(r, &others) {
            Ok(c) => per_observer.push(Some(c)),
            Err(Error::UndefinedCorrelation(_)) => {
                per_observer.push(None);
                excluded.push(o);
            }
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = per_observer.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedCorrelation(
            "every observer is constant".into(),
        ));
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(Consistency {
        per_observer,
        mean,
        excluded,
    })
}
