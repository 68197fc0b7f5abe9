//! Append-only rating log and the session state replayed from it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::round::RoundConfig;
use super::session::{session_id, Session, SessionStatus};
use crate::error::{Error, Result};
use crate::funnel::{RatingRecord, Response};

/// Acknowledgement of a stored rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub trial_index: usize,
    pub cursor: usize,
    pub complete: bool,
    /// The rating was already stored by an earlier, unacknowledged submit.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionProgress {
    pub session_id: String,
    pub rater_id: String,
    pub cursor: usize,
    pub total: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundProgress {
    pub round_id: String,
    pub raters_required: usize,
    pub raters_complete: usize,
    pub records: usize,
    pub sessions: Vec<SessionProgress>,
}

/// Rounds, sessions and the durable record log behind them. Every accepted
/// rating is written and synced before [`Experiment::submit`] returns.
#[derive(Debug)]
pub struct Experiment {
    rounds: BTreeMap<String, RoundConfig>,
    path: PathBuf,
    log: File,
    records: Vec<RatingRecord>,
    sessions: HashMap<String, Session>,
}

/// Cut a torn final line so the next append starts on a line boundary.
fn truncate_torn_tail(path: &Path) -> Result<()> {
    let mut f = OpenOptions::new().read(true).write(true).open(path)?;
    let mut reader = BufReader::new(&mut f);
    let mut good = 0u64;
    let mut line = Vec::new();
    loop {
        line.clear();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        let complete = line.ends_with(b"\n");
        let parses = serde_json::from_slice::<RatingRecord>(&line).is_ok();
        if !complete && !parses {
            break;
        }
        good += n as u64;
        if !complete {
            // A full record missing only its newline.
            drop(reader);
            f.seek(SeekFrom::End(0))?;
            f.write_all(b"\n")?;
            f.sync_data()?;
            return Ok(());
        }
    }
    drop(reader);
    if f.metadata()?.len() != good {
        log::warn!("dropping torn tail of {} after byte {good}", path.display());
        f.set_len(good)?;
        f.sync_data()?;
    }
    Ok(())
}

impl Experiment {
    /// Open or create the log at `path` and replay it. A record repeating
    /// an already replayed (session, trial) is skipped.
    pub fn open(rounds: Vec<RoundConfig>, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in rounds {
            r.validate()?;
            if map.contains_key(&r.round_id) {
                return Err(Error::invalid(format!("duplicate round {}", r.round_id)));
            }
            map.insert(r.round_id.clone(), r);
        }
        if path.exists() {
            truncate_torn_tail(path)?;
        }
        let log = OpenOptions::new().create(true).append(true).open(path)?;
        let mut exp = Experiment {
            rounds: map,
            path: path.to_path_buf(),
            log,
            records: Vec::new(),
            sessions: HashMap::new(),
        };
        let stored = crate::funnel::read_records(path)?;
        let mut skipped = 0;
        for (i, r) in stored.into_iter().enumerate() {
            let s = exp
                .session_mut(&r.rater_id, &r.round_id)
                .map_err(|e| Error::format(path, format!("record {}: {e}", i + 1)))?;
            if r.session_id != s.session_id {
                return Err(Error::format(
                    path,
                    format!("record {}: session id does not match its rater", i + 1),
                ));
            }
            if r.trial_index < s.cursor {
                skipped += 1;
                continue;
            }
            if r.trial_index != s.cursor || s.current() != Some(r.image_id.as_str()) {
                return Err(Error::format(
                    path,
                    format!(
                        "record {}: out of order for session {}",
                        i + 1,
                        s.session_id
                    ),
                ));
            }
            s.advance();
            exp.records.push(r);
        }
        if skipped > 0 {
            log::warn!("skipped {skipped} duplicate records in {}", path.display());
        }
        Ok(exp)
    }

    fn session_mut(&mut self, rater_id: &str, round_id: &str) -> Result<&mut Session> {
        let round = self
            .rounds
            .get(round_id)
            .ok_or_else(|| Error::NotFound(format!("round {round_id}")))?;
        if rater_id.is_empty() {
            return Err(Error::invalid("rater_id must not be empty"));
        }
        let id = session_id(round_id, rater_id);
        Ok(self
            .sessions
            .entry(id)
            .or_insert_with(|| Session::new(round, rater_id)))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundConfig> {
        self.rounds.values()
    }

    pub fn round(&self, round_id: &str) -> Result<&RoundConfig> {
        self.rounds
            .get(round_id)
            .ok_or_else(|| Error::NotFound(format!("round {round_id}")))
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    /// Start a session, or return the existing one of this rater.
    pub fn open_session(&mut self, rater_id: &str, round_id: &str) -> Result<Session> {
        self.session_mut(rater_id, round_id).map(|s| s.clone())
    }

    pub fn session(&self, session_id: &str) -> Result<&Session> {
        self.sessions
            .get(session_id)
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))
    }

    fn last_record(&self, session_id: &str) -> Option<&RatingRecord> {
        self.records
            .iter()
            .rev()
            .find(|r| r.session_id == session_id)
    }

    pub fn submit(
        &mut self,
        session_id: &str,
        image_id: &str,
        response: Response,
        rt_ms: u64,
        timestamp: u64,
    ) -> Result<Ack> {
        let s = self.session(session_id)?;
        let task = self.round(&s.round_id)?.task;
        if s.current() != Some(image_id) {
            // A retry of a rating stored before the client saw its ack.
            if let Some(last) = self.last_record(session_id) {
                if last.trial_index + 1 == s.cursor
                    && last.image_id == image_id
                    && last.response == response
                {
                    return Ok(Ack {
                        session_id: session_id.to_string(),
                        trial_index: last.trial_index,
                        cursor: s.cursor,
                        complete: s.status == SessionStatus::Complete,
                        duplicate: true,
                    });
                }
            }
            let reason = match s.current() {
                Some(cur) => format!("expected image {cur}, got {image_id}"),
                None => "session is complete".to_string(),
            };
            return Err(Error::RatingRejected {
                reason,
                current_trial: s.current().map(|_| s.cursor),
                current_image: s.current().map(str::to_string),
            });
        }
        if !response.is_legal_for(task) {
            return Err(Error::invalid(format!(
                "response {} is not legal for task {task:?}",
                serde_json::to_string(&response)?
            )));
        }
        let record = RatingRecord {
            session_id: session_id.to_string(),
            rater_id: s.rater_id.clone(),
            image_id: image_id.to_string(),
            round_id: s.round_id.clone(),
            trial_index: s.cursor,
            task,
            response,
            rt_ms,
            timestamp,
        };
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        self.log.write_all(&line)?;
        self.log.sync_data()?;
        self.records.push(record);
        let s = self.sessions.get_mut(session_id).expect("checked above");
        let trial_index = s.cursor;
        s.advance();
        Ok(Ack {
            session_id: session_id.to_string(),
            trial_index,
            cursor: s.cursor,
            complete: s.status == SessionStatus::Complete,
            duplicate: false,
        })
    }

    pub fn progress(&self, round_id: &str) -> Result<RoundProgress> {
        let round = self.round(round_id)?;
        let mut sessions: Vec<SessionProgress> = self
            .sessions
            .values()
            .filter(|s| s.round_id == round_id)
            .map(|s| SessionProgress {
                session_id: s.session_id.clone(),
                rater_id: s.rater_id.clone(),
                cursor: s.cursor,
                total: s.trials.len(),
                status: s.status,
            })
            .collect();
        sessions.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
        Ok(RoundProgress {
            round_id: round_id.to_string(),
            raters_required: round.raters_required,
            raters_complete: sessions
                .iter()
                .filter(|s| s.status == SessionStatus::Complete)
                .count(),
            records: self
                .records
                .iter()
                .filter(|r| r.round_id == round_id)
                .count(),
            sessions,
        })
    }

    /// Rounds still short of their required completed raters.
    pub fn open_rounds(&self) -> Vec<String> {
        self.rounds
            .keys()
            .filter(|id| {
                let p = self.progress(id).expect("known round");
                p.raters_complete < p.raters_required
            })
            .cloned()
            .collect()
    }

    pub fn sync(&self) -> Result<()> {
        self.log.sync_all()?;
        Ok(())
    }
}
