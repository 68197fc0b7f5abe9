//! Multi-round selection of the diagnostic image set: three-way screening
//! (A1), crowd ratings (A2), lab ratings of conflicting images (A3),
//! veridical fill-in, and the external-image stream (B1, B2).
//!
//! Every round is a pure function of a frozen record store and a seed.
//! Simulated raters produce such stores for testing.

pub mod assemble;
pub mod config;
pub mod records;
pub mod rounds;
pub mod run;
pub mod score;
pub mod sim;


pub use assemble::{
    assemble_diagnostic_set, point_biserial, DiagnosticEntry, DiagnosticSet, Provenance, TrueClass,
};
pub use config::FunnelConfig;
pub use records::{
    read_records, records_digest, write_records, Judgment, RatingRecord, Response, Task, YesNo,
};
pub use rounds::{
    round_a1_select, round_a2_select, round_a3_select, round_b_select, veridical_select, A1Result,
    A2Result, BResult, BinnedSelection, Catalog,
};
pub use run::{run_funnel, FunnelRun, StageCounts};
pub use score::{bin_assign, consensus_bin, consistency_check, summarize, ScoreSummary};
pub use sim::{
    simulate, simulated_rater, synthetic_population, LatentImage, Population, SimConfig, Simulation,
};
