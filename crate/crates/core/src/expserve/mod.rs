//! Rating collection: round and session management, a durable record log,
//! catch-trial checks, the HTTP service, and the one-command pipeline.

pub mod pipeline;
pub mod quality;
pub mod round;
pub mod server;
pub mod session;
pub mod store;


pub use pipeline::{
    pipeline, Manifest, ManifestEntry, PipelineConfig, PipelineRun, PipelineSummary,
};
pub use quality::{catch_quality, flagged_raters};
pub use round::{load_rounds, CatchTrial, RoundConfig};
pub use server::{router, serve, AppState, Next, ServeConfig, TrialView};
pub use session::{session_id, trial_order, Session, SessionStatus};
pub use store::{Ack, Experiment, RoundProgress, SessionProgress};
