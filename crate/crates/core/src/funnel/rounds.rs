//! Selection rounds. Every function is pure over a slice of records and a
//! seed; randomness only breaks ties and draws quota samples.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::assemble::{DiagnosticEntry, Provenance, TrueClass};
use super::records::{Judgment, RatingRecord, Response, YesNo};
use super::score::{consensus_bin, rate5_by_image, rater_order, summarize_image};
use crate::error::Result;
use crate::rng;
use crate::synthgen::Material;

/// True material per image id. External images are `Material::Unknown`.
pub type Catalog = BTreeMap<String, Material>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub available: usize,
    pub taken: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Result {
    /// Sorted image ids.
    pub selected: Vec<String>,
    pub excluded_hard: Vec<String>,
    /// Keyed `"<true>-as-<judged>"`.
    pub buckets: BTreeMap<String, Bucket>,
    /// Buckets smaller than the quota, taken whole.
    pub shortfall: Vec<String>,
}

fn material_name(m: Material) -> &'static str {
    match m {
        Material::Mirror => "mirror",
        Material::Glass => "glass",
        Material::Unknown => "unknown",
    }
}

fn sample_sorted(mut ids: Vec<String>, n: usize, seed: u64, tag: &str) -> Vec<String> {
    ids.sort();
    ids.shuffle(&mut rng::rng_for(seed, tag));
    ids.truncate(n);
    ids.sort();
    ids
}

/// Three-way screening: drop any image with a "hard" vote, bucket the rest
/// by true class and majority judgment, draw `quota` per bucket.
pub fn round_a1_select(
    records: &[RatingRecord],
    catalog: &Catalog,
    quota: usize,
    seed: u64,
) -> A1Result {
    let mut votes: BTreeMap<&str, Vec<Judgment>> = BTreeMap::new();
    for r in records {
        if let Response::ThreeWay(j) = r.response {
            votes.entry(&r.image_id).or_default().push(j);
        }
    }
    let mut excluded_hard = Vec::new();
    let mut pools: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for m in ["mirror", "glass"] {
        for j in ["mirror", "glass"] {
            pools.insert(format!("{m}-as-{j}"), Vec::new());
        }
    }
    for (id, vs) in votes {
        if vs.contains(&Judgment::Hard) {
            excluded_hard.push(id.to_owned());
            continue;
        }
        let Some(&truth) = catalog.get(id) else {
            continue;
        };
        if truth == Material::Unknown {
            continue;
        }
        let mirror = vs.iter().filter(|v| **v == Judgment::Mirror).count();
        let glass = vs.len() - mirror;
        // Ties go to the first judgment in store order.
        let judged = if mirror != glass {
            if mirror > glass {
                "mirror"
            } else {
                "glass"
            }
        } else if vs[0] == Judgment::Mirror {
            "mirror"
        } else {
            "glass"
        };
        let key = format!("{}-as-{judged}", material_name(truth));
        pools
            .get_mut(&key)
            .expect("bucket exists")
            .push(id.to_owned());
    }
    let mut selected = Vec::new();
    let mut buckets = BTreeMap::new();
    let mut shortfall = Vec::new();
    for (key, ids) in pools {
        let available = ids.len();
        if available < quota {
            shortfall.push(key.clone());
        }
        let take = sample_sorted(ids, quota, seed, &format!("a1-{key}"));
        buckets.insert(
            key,
            Bucket {
                available,
                taken: take.len(),
            },
        );
        selected.extend(take);
    }
    selected.sort();
    A1Result {
        selected,
        excluded_hard,
        buckets,
        shortfall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Result {
    pub selected: Vec<String>,
    pub mirror: Vec<String>,
    pub glass: Vec<String>,
    /// Images with enough raters to be considered.
    pub analyzed: usize,
}

/// Conflicting ratings: mirror images scored below 0.4 and glass images
/// scored 0.6 or above, balanced to the smaller side (and `per_side`).
pub fn round_a2_select(
    records: &[RatingRecord],
    catalog: &Catalog,
    min_raters: usize,
    per_side: Option<usize>,
    seed: u64,
) -> A2Result {
    let (mut mirror, mut glass, mut analyzed) = (Vec::new(), Vec::new(), 0);
    for (id, rs) in rate5_by_image(records) {
        let Some(s) = summarize_image(id, &rs) else {
            continue;
        };
        if s.raters < min_raters {
            continue;
        }
        analyzed += 1;
        match (catalog.get(id), s.bin()) {
            (Some(Material::Mirror), 1..=2) => mirror.push(id.to_owned()),
            (Some(Material::Glass), 4..=5) => glass.push(id.to_owned()),
            _ => {}
        }
    }
    let n = mirror
        .len()
        .min(glass.len())
        .min(per_side.unwrap_or(usize::MAX));
    let mirror = sample_sorted(mirror, n, seed, "a2-mirror");
    let glass = sample_sorted(glass, n, seed, "a2-glass");
    let mut selected: Vec<String> = mirror.iter().chain(&glass).cloned().collect();
    selected.sort();
    A2Result {
        selected,
        mirror,
        glass,
        analyzed,
    }
}

/// Per-class, per-bin selection shared by the rate5 rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSelection {
    pub entries: Vec<DiagnosticEntry>,
    /// Certified candidates per `"<class>-<bin>"` pool.
    pub available: BTreeMap<String, usize>,
    /// Pools smaller than the quota. The quota for every pool then drops to
    /// the smallest pool so that bins and classes stay balanced.
    pub shortfall: Vec<String>,
    pub quota: usize,
}

/// Certified candidates: images whose first `n_required` raters agree on a
/// bin that also matches the bin of the image's mean score.
fn certified(
    records: &[RatingRecord],
    catalog: &Catalog,
    n_required: usize,
    provenance: Provenance,
) -> Result<Vec<DiagnosticEntry>> {
    let mut out = Vec::new();
    for (id, rs) in rate5_by_image(records) {
        if rater_order(&rs).len() < n_required {
            continue;
        }
        let summary = summarize_image(id, &rs).expect("non-empty group");
        let bin = summary.bin();
        if consensus_bin(&rs, n_required)? != Some(bin) {
            continue;
        }
        let true_class = match catalog.get(id) {
            Some(Material::Mirror) => TrueClass::Mirror,
            Some(Material::Glass) => TrueClass::Glass,
            _ => TrueClass::External,
        };
        out.push(DiagnosticEntry {
            image_id: id.to_owned(),
            true_class,
            bin,
            mean_score: summary.mean,
            raters: summary.raters,
            provenance,
            consistent: true,
        });
    }
    Ok(out)
}

/// Draw `n` entries from `pool`. With `targets`, each target score claims
/// the closest remaining candidate so that the draw mirrors the targets'
/// score distribution; otherwise the draw is uniform.
fn draw(
    mut pool: Vec<DiagnosticEntry>,
    n: usize,
    targets: &[f64],
    seed: u64,
    tag: &str,
) -> Vec<DiagnosticEntry> {
    pool.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    pool.shuffle(&mut rng::rng_for(seed, tag));
    let mut out = Vec::with_capacity(n);
    for t in targets.iter().take(n) {
        let Some(k) = (0..pool.len()).min_by(|&a, &b| {
            (pool[a].mean_score - t)
                .abs()
                .total_cmp(&(pool[b].mean_score - t).abs())
                .then(a.cmp(&b))
        }) else {
            break;
        };
        out.push(pool.remove(k));
    }
    let rest = n.saturating_sub(out.len()).min(pool.len());
    out.extend(pool.drain(..rest));
    out
}

fn pool_key(c: TrueClass, bin: u8) -> String {
    let name = match c {
        TrueClass::Mirror => "mirror",
        TrueClass::Glass => "glass",
        TrueClass::External => "external",
    };
    format!("{name}-{bin}")
}

/// Fill the `(class, bin)` pools in `plan` with `quota` certified entries
/// each. Pools listed in `match_to` draw to mirror the scores of an earlier
/// pool or of caller-supplied targets.
fn select_binned(
    candidates: Vec<DiagnosticEntry>,
    plan: &[(TrueClass, u8)],
    quota: usize,
    targets: &BTreeMap<u8, Vec<f64>>,
    match_to: &[((TrueClass, u8), (TrueClass, u8))],
    seed: u64,
    tag: &str,
) -> BinnedSelection {
    let mut pools: BTreeMap<String, Vec<DiagnosticEntry>> = plan
        .iter()
        .map(|&(c, b)| (pool_key(c, b), Vec::new()))
        .collect();
    for e in candidates {
        if let Some(p) = pools.get_mut(&pool_key(e.true_class, e.bin)) {
            p.push(e);
        }
    }
    let available: BTreeMap<String, usize> =
        pools.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    let shortfall: Vec<String> = available
        .iter()
        .filter(|(_, &n)| n < quota)
        .map(|(k, _)| k.clone())
        .collect();
    let quota = available.values().copied().min().unwrap_or(0).min(quota);
    let mut chosen: BTreeMap<String, Vec<DiagnosticEntry>> = BTreeMap::new();
    for &(c, b) in plan {
        let key = pool_key(c, b);
        let pool = pools.remove(&key).expect("planned pool");
        let t: Vec<f64> = match match_to.iter().find(|(p, _)| *p == (c, b)) {
            Some((_, src)) => chosen[&pool_key(src.0, src.1)]
                .iter()
                .map(|e| e.mean_score)
                .collect(),
            None => targets.get(&b).cloned().unwrap_or_default(),
        };
        let mut t = t;
        t.sort_by(f64::total_cmp);
        chosen.insert(
            key.clone(),
            draw(pool, quota, &t, seed, &format!("{tag}-{key}")),
        );
    }
    let mut entries: Vec<DiagnosticEntry> = chosen.into_values().flatten().collect();
    entries.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    BinnedSelection {
        entries,
        available,
        shortfall,
        quota,
    }
}

/// Illusory images: mirror placed in bins 1-3, glass in bins 3-5, `per_bin`
/// of each class in each of those bins. In the shared middle bin the glass
/// draw follows the mirror draw's scores.
pub fn round_a3_select(
    records: &[RatingRecord],
    catalog: &Catalog,
    per_bin: usize,
    n_required: usize,
    seed: u64,
) -> Result<BinnedSelection> {
    use TrueClass::{Glass, Mirror};
    let candidates = certified(records, catalog, n_required, Provenance::Illusory)?;
    let plan = [
        (Mirror, 1),
        (Mirror, 2),
        (Mirror, 3),
        (Glass, 3),
        (Glass, 4),
        (Glass, 5),
    ];
    Ok(select_binned(
        candidates,
        &plan,
        per_bin,
        &BTreeMap::new(),
        &[((Glass, 3), (Mirror, 3))],
        seed,
        "a3",
    ))
}

/// Veridical images: glass placed in bins 1-2 and mirror in bins 4-5, all
/// raters agreeing. `targets` holds, per bin, the scores of the illusory
/// entries the draw should mirror; ids in `exclude` are never chosen.
pub fn veridical_select(
    records: &[RatingRecord],
    catalog: &Catalog,
    per_bin: usize,
    n_required: usize,
    targets: &BTreeMap<u8, Vec<f64>>,
    exclude: &BTreeSet<String>,
    seed: u64,
) -> Result<BinnedSelection> {
    use TrueClass::{Glass, Mirror};
    let mut candidates = certified(records, catalog, n_required, Provenance::Veridical)?;
    candidates.retain(|e| !exclude.contains(&e.image_id));
    let plan = [(Glass, 1), (Glass, 2), (Mirror, 4), (Mirror, 5)];
    Ok(select_binned(
        candidates,
        &plan,
        per_bin,
        targets,
        &[],
        seed,
        "veridical",
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BResult {
    /// External images passing the recognizability screen, sorted.
    pub screened: Vec<String>,
    pub selection: BinnedSelection,
    /// Fraction of labeled anchor images rated on the correct side
    /// (mirror in bins 4-5, glass in bins 1-2), if any were shown.
    pub anchor_agreement: Option<f64>,
}

/// External stream: keep images at least `min_yes` raters found
/// recognizable (one vote per rater, their first), optionally capped at
/// `screen_quota`; then draw `per_bin` certified images per bin.
#[allow(clippy::too_many_arguments)]
pub fn round_b_select(
    screen_records: &[RatingRecord],
    rating_records: &[RatingRecord],
    catalog: &Catalog,
    min_yes: usize,
    screen_quota: Option<usize>,
    per_bin: usize,
    n_required: usize,
    seed: u64,
) -> Result<BResult> {
    let mut votes: BTreeMap<&str, BTreeMap<&str, YesNo>> = BTreeMap::new();
    for r in screen_records {
        if let Response::Binary(v) = r.response {
            votes
                .entry(&r.image_id)
                .or_default()
                .entry(&r.rater_id)
                .or_insert(v);
        }
    }
    let passing: Vec<String> = votes
        .into_iter()
        .filter(|(id, _)| matches!(catalog.get(*id), Some(Material::Unknown) | None))
        .filter(|(_, v)| v.values().filter(|x| **x == YesNo::Yes).count() >= min_yes)
        .map(|(id, _)| id.to_owned())
        .collect();
    let n = screen_quota.unwrap_or(passing.len());
    let screened = sample_sorted(passing, n, seed, "b1");
    let keep: BTreeSet<&str> = screened.iter().map(String::as_str).collect();
    let rated: Vec<RatingRecord> = rating_records
        .iter()
        .filter(|r| keep.contains(r.image_id.as_str()))
        .cloned()
        .collect();
    let candidates = certified(&rated, catalog, n_required, Provenance::External)?;
    let plan: Vec<(TrueClass, u8)> = (1..=5).map(|b| (TrueClass::External, b)).collect();
    let selection = select_binned(
        candidates,
        &plan,
        per_bin,
        &BTreeMap::new(),
        &[],
        seed,
        "b2",
    );

    let (mut hits, mut total) = (0usize, 0usize);
    for (id, rs) in rate5_by_image(rating_records) {
        let truth = catalog.get(id).copied();
        if !matches!(truth, Some(Material::Mirror | Material::Glass)) {
            continue;
        }
        let bin = summarize_image(id, &rs).expect("non-empty group").bin();
        total += 1;
        hits += usize::from(matches!(
            (truth, bin),
            (Some(Material::Mirror), 4..=5) | (Some(Material::Glass), 1..=2)
        ));
    }
    let anchor_agreement = (total > 0).then(|| hits as f64 / total as f64);
    Ok(BResult {
        screened,
        selection,
        anchor_agreement,
    })
}
