use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROUND_A1: &str = "A1";
pub const ROUND_A2: &str = "A2";
pub const ROUND_A3: &str = "A3";
pub const ROUND_VERIDICAL: &str = "V";
pub const ROUND_B1: &str = "B1";
pub const ROUND_B2: &str = "B2";

/// Quotas and thresholds of the selection rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelConfig {
    /// Images drawn per (true class x judged class) bucket in A1.
    pub a1_quota: usize,
    pub a2_min_raters: usize,
    /// Cap on each side of the A2 conflict selection.
    pub a2_per_side: Option<usize>,
    /// A3 images per class in each of its three bins.
    pub illusory_per_bin: usize,
    /// Veridical images in each of bins 1, 2, 4 and 5.
    pub veridical_per_bin: usize,
    pub b1_min_yes: usize,
    pub b1_quota: Option<usize>,
    pub external_per_bin: usize,
    /// Raters that must agree for a consistency certificate.
    pub n_required: usize,
    /// Bound on the point-biserial |r| of the labeled entries.
    pub max_abs_r: f64,
}

impl FunnelConfig {
    /// 10,976 / 522 / 102 / 68 / 500 / 95 / 265.
    pub fn paper() -> Self {
        Self {
            a1_quota: 2744,
            a2_min_raters: 3,
            a2_per_side: Some(261),
            illusory_per_bin: 17,
            veridical_per_bin: 17,
            b1_min_yes: 6,
            b1_quota: Some(500),
            external_per_bin: 19,
            n_required: 10,
            max_abs_r: 0.05,
        }
    }

    /// Quotas for a corpus of about a thousand renders.
    pub fn desk() -> Self {
        Self {
            a1_quota: 150,
            a2_min_raters: 3,
            a2_per_side: None,
            illusory_per_bin: 3,
            veridical_per_bin: 3,
            b1_min_yes: 6,
            b1_quota: Some(60),
            external_per_bin: 3,
            n_required: 10,
            max_abs_r: 0.05,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            _ => Err(Error::invalid(format!("unknown funnel preset `{name}`"))),
        }
    }

    pub fn expected_total(&self) -> usize {
        6 * self.illusory_per_bin + 4 * self.veridical_per_bin + 5 * self.external_per_bin
    }
}
