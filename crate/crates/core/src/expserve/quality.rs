use std::collections::{BTreeMap, BTreeSet};

use super::round::RoundConfig;
use crate::funnel::{Judgment, RatingRecord, Response};
use crate::synthgen::Material;

/// Whether `response` puts a catch image of class `expected` at the far
/// end of the scale.
fn opposite(expected: Material, response: Response) -> bool {
    matches!(
        (expected, response),
        (Material::Mirror, Response::Rate5(1))
            | (Material::Glass, Response::Rate5(5))
            | (Material::Mirror, Response::ThreeWay(Judgment::Glass))
            | (Material::Glass, Response::ThreeWay(Judgment::Mirror))
    )
}

/// Pass (true) or fail for every rater with records in `round`.
pub fn catch_quality(records: &[RatingRecord], round: &RoundConfig) -> BTreeMap<String, bool> {
    let expected: BTreeMap<&str, Material> = round
        .catch
        .iter()
        .map(|c| (c.image_id.as_str(), c.expected))
        .collect();
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.round_id == round.round_id) {
        let pass = out.entry(r.rater_id.clone()).or_insert(true);
        if let Some(&m) = expected.get(r.image_id.as_str()) {
            if opposite(m, r.response) {
                *pass = false;
            }
        }
    }
    out
}

/// Raters failing the catch check of any round. Their records stay in the
/// store; pass this set to the funnel to leave them out.
pub fn flagged_raters<'a>(
    records: &[RatingRecord],
    rounds: impl IntoIterator<Item = &'a RoundConfig>,
) -> BTreeSet<String> {
    rounds
        .into_iter()
        .flat_map(|r| catch_quality(records, r))
        .filter(|(_, pass)| !pass)
        .map(|(rater, _)| rater)
        .collect()
}
