use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::RatingRecord;
use crate::error::{Error, Result};

pub const BINS: usize = 5;
const EDGES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// Bin of a normalized score: `[0,0.2)` is 1, ..., `[0.8,1.0]` is 5.
pub fn bin_assign(s: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("score {s} outside [0, 1]")));
    }
    Ok(1 + EDGES.iter().filter(|&&e| s >= e).count() as u8)
}

/// Mean of rate5 responses mapped through `(r - 1) / 4`. A single division
/// keeps scores that sit exactly on a bin edge on that edge.
pub fn normalized_mean(responses: impl IntoIterator<Item = u8>) -> Option<f64> {
    let (mut sum, mut n) = (0u64, 0u64);
    for r in responses {
        sum += u64::from(r - 1);
        n += 1;
    }
    (n > 0).then(|| sum as f64 / (4 * n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub image_id: String,
    /// Mean normalized score in `[0, 1]`.
    pub mean: f64,
    /// Distinct raters.
    pub raters: usize,
    /// Responses per scale point; sums to the number of responses.
    pub counts: [usize; BINS],
}

impl ScoreSummary {
    pub fn bin(&self) -> u8 {
        bin_assign(self.mean).expect("mean of legal responses lies in [0, 1]")
    }
}

/// Rate5 records grouped by image, each group in store order.
pub fn rate5_by_image<'a>(
    records: impl IntoIterator<Item = &'a RatingRecord>,
) -> BTreeMap<&'a str, Vec<&'a RatingRecord>> {
    let mut out: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    for r in records {
        if r.response.rate5().is_some() {
            out.entry(r.image_id.as_str()).or_default().push(r);
        }
    }
    out
}

pub fn summarize_image(image_id: &str, records: &[&RatingRecord]) -> Option<ScoreSummary> {
    let responses: Vec<u8> = records.iter().filter_map(|r| r.response.rate5()).collect();
    let mean = normalized_mean(responses.iter().copied())?;
    let mut counts = [0; BINS];
    for r in &responses {
        counts[usize::from(r - 1)] += 1;
    }
    Some(ScoreSummary {
        image_id: image_id.to_owned(),
        mean,
        raters: rater_order(records).len(),
        counts,
    })
}

pub fn summarize<'a>(
    records: impl IntoIterator<Item = &'a RatingRecord>,
) -> BTreeMap<String, ScoreSummary> {
    rate5_by_image(records)
        .into_iter()
        .filter_map(|(id, rs)| summarize_image(id, &rs).map(|s| (id.to_owned(), s)))
        .collect()
}

/// Distinct raters in order of first appearance.
pub fn rater_order<'a>(records: &[&'a RatingRecord]) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for r in records {
        if !out.contains(&r.rater_id.as_str()) {
            out.push(&r.rater_id);
        }
    }
    out
}

/// The shared bin of the first `n_required` raters (by session order), or
/// `None` when they disagree. A rater who saw the image on several trials
/// is placed by the mean of those trials; with one trial this is simply the
/// response itself.
pub fn consensus_bin(records: &[&RatingRecord], n_required: usize) -> Result<Option<u8>> {
    let rated: Vec<&RatingRecord> = records
        .iter()
        .copied()
        .filter(|r| r.response.rate5().is_some())
        .collect();
    let raters = rater_order(&rated);
    if n_required == 0 || raters.len() < n_required {
        return Err(Error::InsufficientData(format!(
            "{} raters, {n_required} required",
            raters.len()
        )));
    }
    let mut bin = None;
    for rater in &raters[..n_required] {
        let mean = normalized_mean(
            rated
                .iter()
                .filter(|r| r.rater_id == *rater)
                .filter_map(|r| r.response.rate5()),
        )
        .expect("rater has at least one response");
        let b = bin_assign(mean)?;
        match bin {
            None => bin = Some(b),
            Some(prev) if prev != b => return Ok(None),
            _ => {}
        }
    }
    Ok(bin)
}

/// Whether the first `n_required` raters all placed the image in one bin.
pub fn consistency_check(records: &[&RatingRecord], n_required: usize) -> Result<bool> {
    Ok(consensus_bin(records, n_required)?.is_some())
}
