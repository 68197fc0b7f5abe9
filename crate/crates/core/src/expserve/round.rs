use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funnel::Task;
use crate::synthgen::Material;

fn default_duration() -> u64 {
    1000
}

fn one() -> usize {
    1
}

/// A catch image and the material it unmistakably shows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatchTrial {
    pub image_id: String,
    pub expected: Material,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub round_id: String,
    pub task: Task,
    pub images: Vec<String>,
    /// Stimulus display time; enforced by the client.
    #[serde(default = "default_duration")]
    pub duration_ms: u64,
    #[serde(default = "one")]
    pub trials_per_image: usize,
    #[serde(default)]
    pub catch: Vec<CatchTrial>,
    pub raters_required: usize,
    /// Mixed with the round and rater ids to order each session.
    #[serde(default)]
    pub seed: u64,
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.round_id.is_empty() {
            return Err(Error::invalid("round_id must not be empty"));
        }
        if self.duration_ms == 0 {
            return Err(Error::invalid(format!(
                "round {}: duration_ms must be positive",
                self.round_id
            )));
        }
        if self.trials_per_image == 0 {
            return Err(Error::invalid(format!(
                "round {}: trials_per_image must be positive",
                self.round_id
            )));
        }
        let images: BTreeSet<&str> = self.images.iter().map(String::as_str).collect();
        if let Some(c) = self
            .catch
            .iter()
            .find(|c| images.contains(c.image_id.as_str()))
        {
            return Err(Error::invalid(format!(
                "round {}: catch image {} is also a test image",
                self.round_id, c.image_id
            )));
        }
        if self.catch.iter().any(|c| c.expected == Material::Unknown) {
            return Err(Error::invalid(format!(
                "round {}: catch expectations must be mirror or glass",
                self.round_id
            )));
        }
        Ok(())
    }

    /// Trials in one session: every image `trials_per_image` times plus
    /// each catch image once.
    pub fn trial_count(&self) -> usize {
        self.images.len() * self.trials_per_image + self.catch.len()
    }

    pub fn is_catch(&self, image_id: &str) -> bool {
        self.catch.iter().any(|c| c.image_id == image_id)
    }

    pub fn scale_labels(&self) -> Vec<&'static str> {
        match self.task {
            Task::Rate5 => vec!["glass", "", "", "", "mirror"],
            Task::Rate3way => vec!["mirror", "glass", "hard"],
            Task::BinaryRecognizable => vec!["yes", "no"],
        }
    }
}

/// Load a JSON array of rounds and check each one and their ids.
pub fn load_rounds(path: &Path) -> Result<Vec<RoundConfig>> {
    let text = std::fs::read_to_string(path)?;
    let rounds: Vec<RoundConfig> =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let mut ids = BTreeSet::new();
    for r in &rounds {
        r.validate()?;
        if !ids.insert(r.round_id.as_str()) {
            return Err(Error::format(
                path,
                format!("duplicate round {}", r.round_id),
            ));
        }
    }
    Ok(rounds)
}
