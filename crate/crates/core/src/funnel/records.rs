use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Five-point scale, 1 = glass, 5 = mirror.
    Rate5,
    /// Mirror, glass or hard to recognize.
    Rate3way,
    BinaryRecognizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Mirror,
    Glass,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YesNo {
    Yes,
    No,
}

/// A response in its JSON form: an integer for `rate5`, `"mirror"`,
/// `"glass"` or `"hard"` for `rate3way`, `"yes"` or `"no"` for the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Rate5(u8),
    ThreeWay(Judgment),
    Binary(YesNo),
}

impl Response {
    pub fn is_legal_for(&self, task: Task) -> bool {
        matches!(
            (self, task),
            (Response::Rate5(1..=5), Task::Rate5)
                | (Response::ThreeWay(_), Task::Rate3way)
                | (Response::Binary(_), Task::BinaryRecognizable)
        )
    }

    pub fn rate5(&self) -> Option<u8> {
        match self {
            Response::Rate5(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub rater_id: String,
    pub image_id: String,
    pub round_id: String,
    /// Position of the trial within its session.
    pub trial_index: usize,
    pub task: Task,
    pub response: Response,
    pub rt_ms: u64,
    /// Milliseconds since the Unix epoch, or a logical clock in simulations.
    pub timestamp: u64,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.response.is_legal_for(self.task) {
            return Err(Error::invalid(format!(
                "response {:?} is not legal for task {:?}",
                self.response, self.task
            )));
        }
        Ok(())
    }
}

pub fn write_records(path: &Path, records: &[RatingRecord]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Read a JSON Lines record store. A trailing partial line (an interrupted
/// append) is ignored; a malformed line elsewhere is an error.
pub fn read_records(path: &Path) -> Result<Vec<RatingRecord>> {
    let f = BufReader::new(File::open(path)?);
    let lines: Vec<String> = f.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RatingRecord>(line) {
            Ok(r) => {
                r.validate()
                    .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
                out.push(r);
            }
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(Error::format(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

/// SHA-256 over the canonical JSON line of every record, in store order.
pub fn records_digest(records: &[RatingRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_vec(r).expect("records serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
