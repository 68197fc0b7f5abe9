use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::round::RoundConfig;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub rater_id: String,
    pub round_id: String,
    pub trials: Vec<String>,
    /// Index of the next trial to rate.
    pub cursor: usize,
    pub status: SessionStatus,
}

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Stable id of the session of `rater_id` in `round_id`; a rater has at
/// most one session per round, so reconnecting resumes it.
pub fn session_id(round_id: &str, rater_id: &str) -> String {
    hex::encode(&digest(&[round_id.as_bytes(), rater_id.as_bytes()])[..12])
}

pub fn shuffle_seed(round: &RoundConfig, rater_id: &str) -> u64 {
    let d = digest(&[
        round.round_id.as_bytes(),
        rater_id.as_bytes(),
        &round.seed.to_le_bytes(),
    ]);
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

/// Repeated presentations and catch images, shuffled per rater.
pub fn trial_order(round: &RoundConfig, rater_id: &str) -> Vec<String> {
    let mut trials: Vec<String> = (0..round.trials_per_image)
        .flat_map(|_| round.images.iter().cloned())
        .chain(round.catch.iter().map(|c| c.image_id.clone()))
        .collect();
    trials.shuffle(&mut rng::rng(shuffle_seed(round, rater_id)));
    trials
}

impl Session {
    pub fn new(round: &RoundConfig, rater_id: &str) -> Self {
        let trials = trial_order(round, rater_id);
        let status = if trials.is_empty() {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        };
        Session {
            session_id: session_id(&round.round_id, rater_id),
            rater_id: rater_id.to_string(),
            round_id: round.round_id.clone(),
            trials,
            cursor: 0,
            status,
        }
    }

    pub fn current(&self) -> Option<&str> {
        self.trials.get(self.cursor).map(String::as_str)
    }

    pub fn advance(&mut self) {
        self.cursor = (self.cursor + 1).min(self.trials.len());
        if self.cursor == self.trials.len() {
            self.status = SessionStatus::Complete;
        }
    }
}
