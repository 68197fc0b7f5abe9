use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::FunnelConfig;
use super::score::{bin_assign, BINS};
use crate::error::{Error, Result};
use crate::stats::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueClass {
    Mirror,
    Glass,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Veridical,
    Illusory,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticEntry {
    pub image_id: String,
    pub true_class: TrueClass,
    pub bin: u8,
    pub mean_score: f64,
    pub raters: usize,
    pub provenance: Provenance,
    /// All certifying raters placed the image in `bin`.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSet {
    pub entries: Vec<DiagnosticEntry>,
    pub per_bin: [usize; BINS],
    /// `[mirror, glass]` counts per bin.
    pub labeled_per_bin: [[usize; 2]; BINS],
    /// Point-biserial correlation between true class (mirror 1) and mean
    /// score over labeled entries; 0 when undefined.
    pub decorrelation: f64,
    pub config_hash: String,
    /// Digest of the record store the set was selected from.
    pub source_digest: String,
}

impl DiagnosticSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn config_hash(cfg: &FunnelConfig) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(cfg).expect("config serializes"),
    ))
}

/// Point-biserial r of labeled entries (mirror = 1, glass = 0).
pub fn point_biserial(entries: &[DiagnosticEntry]) -> f64 {
    let labeled: Vec<&DiagnosticEntry> = entries
        .iter()
        .filter(|e| e.true_class != TrueClass::External)
        .collect();
    let class: Vec<f64> = labeled
        .iter()
        .map(|e| f64::from(u8::from(e.true_class == TrueClass::Mirror)))
        .collect();
    let score: Vec<f64> = labeled.iter().map(|e| e.mean_score).collect();
    pearson(&class, &score).unwrap_or(0.0)
}

/// Merge the three streams and certify the result: disjoint ids, every
/// entry consistent and in the bin of its score, equal counts across bins,
/// equal mirror and glass counts within each bin, and a point-biserial
/// |r| below the configured bound.
pub fn assemble_diagnostic_set(
    veridical: &[DiagnosticEntry],
    illusory: &[DiagnosticEntry],
    external: &[DiagnosticEntry],
    cfg: &FunnelConfig,
) -> Result<DiagnosticSet> {
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for e in veridical.iter().chain(illusory).chain(external) {
        if !seen.insert(e.image_id.as_str()) {
            return Err(Error::AssemblyFailed(format!(
                "image {} appears in more than one stream",
                e.image_id
            )));
        }
        if !e.consistent || bin_assign(e.mean_score)? != e.bin {
            return Err(Error::AssemblyFailed(format!(
                "image {} lacks a consistency certificate",
                e.image_id
            )));
        }
        entries.push(e.clone());
    }
    entries.sort_by(|a, b| (a.bin, &a.image_id).cmp(&(b.bin, &b.image_id)));
    let mut per_bin = [0; BINS];
    let mut labeled_per_bin = [[0; 2]; BINS];
    for e in &entries {
        let b = usize::from(e.bin - 1);
        per_bin[b] += 1;
        match e.true_class {
            TrueClass::Mirror => labeled_per_bin[b][0] += 1,
            TrueClass::Glass => labeled_per_bin[b][1] += 1,
            TrueClass::External => {}
        }
    }
    let mut problems = Vec::new();
    if labeled_per_bin.iter().all(|[m, g]| m + g == 0) {
        problems.push("no labeled entries".to_string());
    }
    if per_bin.iter().any(|&n| n != per_bin[0]) {
        problems.push(format!("unequal bin counts {per_bin:?}"));
    }
    for (b, [m, g]) in labeled_per_bin.iter().enumerate() {
        if m != g {
            problems.push(format!("bin {} has {m} mirror and {g} glass", b + 1));
        }
    }
    let decorrelation = point_biserial(&entries);
    if decorrelation.abs() >= cfg.max_abs_r {
        problems.push(format!(
            "point-biserial r = {decorrelation:.4} exceeds {}",
            cfg.max_abs_r
        ));
    }
    if !problems.is_empty() {
        return Err(Error::AssemblyFailed(problems.join("; ")));
    }
    Ok(DiagnosticSet {
        entries,
        per_bin,
        labeled_per_bin,
        decorrelation,
        config_hash: config_hash(cfg),
        source_digest: String::new(),
    })
}
