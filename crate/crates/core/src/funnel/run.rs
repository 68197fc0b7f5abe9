use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::assemble::{assemble_diagnostic_set, DiagnosticSet};
use super::config::*;
use super::records::{records_digest, RatingRecord};
use super::rounds::*;
use crate::error::Result;
use crate::rng;

/// Images carried forward by each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub a1: usize,
    pub a2: usize,
    pub a3: usize,
    pub veridical: usize,
    pub b1: usize,
    pub b2: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelRun {
    pub a1: A1Result,
    pub a2: A2Result,
    pub a3: BinnedSelection,
    pub veridical: BinnedSelection,
    pub b: BResult,
    pub counts: StageCounts,
    pub set: DiagnosticSet,
}

fn round(records: &[RatingRecord], id: &str, within: Option<&BTreeSet<&str>>) -> Vec<RatingRecord> {
    records
        .iter()
        .filter(|r| r.round_id == id && within.is_none_or(|w| w.contains(r.image_id.as_str())))
        .cloned()
        .collect()
}

/// Replay every selection round over a frozen record store. Records of
/// raters in `excluded` are ignored. Each round only sees images its
/// predecessor passed on, so round outputs are subsets of round inputs.
pub fn run_funnel(
    records: &[RatingRecord],
    catalog: &Catalog,
    cfg: &FunnelConfig,
    excluded: &BTreeSet<String>,
    seed: u64,
) -> Result<FunnelRun> {
    let kept: Vec<RatingRecord> = records
        .iter()
        .filter(|r| !excluded.contains(&r.rater_id))
        .cloned()
        .collect();
    let s = |tag: &str| rng::derive_str(seed, tag);

    let a1 = round_a1_select(
        &round(&kept, ROUND_A1, None),
        catalog,
        cfg.a1_quota,
        s("a1"),
    );
    let a1_ids: BTreeSet<&str> = a1.selected.iter().map(String::as_str).collect();
    let a2 = round_a2_select(
        &round(&kept, ROUND_A2, Some(&a1_ids)),
        catalog,
        cfg.a2_min_raters,
        cfg.a2_per_side,
        s("a2"),
    );
    let a2_ids: BTreeSet<&str> = a2.selected.iter().map(String::as_str).collect();
    let a3 = round_a3_select(
        &round(&kept, ROUND_A3, Some(&a2_ids)),
        catalog,
        cfg.illusory_per_bin,
        cfg.n_required,
        s("a3"),
    )?;

    let mut targets: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for e in &a3.entries {
        targets.entry(e.bin).or_default().push(e.mean_score);
    }
    let taken: BTreeSet<String> = a3.entries.iter().map(|e| e.image_id.clone()).collect();
    let veridical = veridical_select(
        &round(&kept, ROUND_VERIDICAL, None),
        catalog,
        // Each veridical pool pairs with an illusory one in its bin.
        cfg.veridical_per_bin.min(a3.quota),
        cfg.n_required,
        &targets,
        &taken,
        s("veridical"),
    )?;
    let b = round_b_select(
        &round(&kept, ROUND_B1, None),
        &round(&kept, ROUND_B2, None),
        catalog,
        cfg.b1_min_yes,
        cfg.b1_quota,
        cfg.external_per_bin,
        cfg.n_required,
        s("b"),
    )?;
    let mut set =
        assemble_diagnostic_set(&veridical.entries, &a3.entries, &b.selection.entries, cfg)?;
    set.source_digest = records_digest(records);
    let counts = StageCounts {
        a1: a1.selected.len(),
        a2: a2.selected.len(),
        a3: a3.entries.len(),
        veridical: veridical.entries.len(),
        b1: b.screened.len(),
        b2: b.selection.entries.len(),
        total: set.len(),
    };
    Ok(FunnelRun {
        a1,
        a2,
        a3,
        veridical,
        b,
        counts,
        set,
    })
}
