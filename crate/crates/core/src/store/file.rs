//! Append-only newline-delimited JSON files, one set per day:
//! `sessions-YYYY-MM-DD.jsonl` and `turns-YYYY-MM-DD.jsonl`, plus
//! `attributes.jsonl` for user and community values. The in-memory index is
//! rebuilt from the files on open; a later session line supersedes an
//! earlier one for the same id.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::memory::MemoryStore;
use super::metrics::{MetricError, MetricQuery, MetricSeries};
use super::record::{SessionRecord, TurnRecord};
use super::{ProfileStore, SessionStore, StoreError};
use crate::model::Scope;
use crate::value::Value;

#[derive(Serialize, Deserialize)]
struct AttributeLine {
    scope: Scope,
    key: String,
    name: String,
    value: Value,
}

#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
    memory: MemoryStore,
}

fn day_file(prefix: &str, at: DateTime<Utc>) -> String {
    format!("{prefix}-{}.jsonl", at.format("%Y-%m-%d"))
}

fn append_line(path: &Path, value: &impl Serialize) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(value).map_err(std::io::Error::other)?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(line.as_bytes())?;
    file.flush()?;
    Ok(())
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path, mut f: impl FnMut(T) -> Result<(), StoreError>) -> Result<(), StoreError> {
    let reader = BufReader::new(fs::File::open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| StoreError::Corrupt {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        let value = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        f(value).map_err(|e| corrupt(e.to_string()))?;
    }
    Ok(())
}

impl FileStore {
    /// Opens (creating if needed) the store in `dir` and rebuilds its index.
    pub fn open(dir: impl Into<PathBuf>) -> Result<FileStore, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut names: Vec<String> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".jsonl"))
            .collect();
        names.sort();

        let memory = MemoryStore::new();
        {
            let mut index = memory.write();
            let mut latest: BTreeMap<String, SessionRecord> = BTreeMap::new();
            for name in names.iter().filter(|n| n.starts_with("sessions-")) {
                read_lines(&dir.join(name), |record: SessionRecord| {
                    latest.insert(record.session_id.clone(), record);
                    Ok(())
                })?;
            }
            for record in latest.into_values() {
                index.create_session(record)?;
            }
            let mut turns: Vec<TurnRecord> = Vec::new();
            for name in names.iter().filter(|n| n.starts_with("turns-")) {
                read_lines(&dir.join(name), |record: TurnRecord| {
                    turns.push(record);
                    Ok(())
                })?;
            }
            turns.sort_by(|a, b| (&a.session_id, a.turn_index).cmp(&(&b.session_id, b.turn_index)));
            for record in turns {
                index.append_turn(record)?;
            }
            let attributes = dir.join("attributes.jsonl");
            if attributes.exists() {
                read_lines(&attributes, |line: AttributeLine| {
                    index.set_attribute(line.scope, &line.key, &line.name, line.value);
                    Ok(())
                })?;
            }
        }
        Ok(FileStore { dir, memory })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl ProfileStore for FileStore {
    fn get_attribute(&self, scope: Scope, key: &str, name: &str) -> Option<Value> {
        self.memory.get_attribute(scope, key, name)
    }

    fn set_attribute(&self, scope: Scope, key: &str, name: &str, value: Value) -> Result<(), StoreError> {
        let mut index = self.memory.write();
        append_line(
            &self.dir.join("attributes.jsonl"),
            &AttributeLine {
                scope,
                key: key.to_string(),
                name: name.to_string(),
                value: value.clone(),
            },
        )?;
        index.set_attribute(scope, key, name, value);
        Ok(())
    }

    fn list_attributes(&self, scope: Scope, key: &str) -> BTreeMap<String, Value> {
        self.memory.list_attributes(scope, key)
    }
}

impl SessionStore for FileStore {
    fn create_session(&self, record: SessionRecord) -> Result<(), StoreError> {
        let mut index = self.memory.write();
        if index.session_exists(&record.session_id) {
            return Err(StoreError::DuplicateSession(record.session_id));
        }
        append_line(&self.dir.join(day_file("sessions", record.started_at)), &record)?;
        index.create_session(record)
    }

    fn update_session(&self, record: SessionRecord) -> Result<(), StoreError> {
        let mut index = self.memory.write();
        if !index.session_exists(&record.session_id) {
            return Err(StoreError::NotFound(record.session_id));
        }
        append_line(&self.dir.join(day_file("sessions", record.started_at)), &record)?;
        index.update_session(record)
    }

    fn append_turn(&self, record: TurnRecord) -> Result<(), StoreError> {
        let mut index = self.memory.write();
        index.check_turn(&record)?;
        append_line(&self.dir.join(day_file("turns", record.received_at)), &record)?;
        index.append_turn(record)
    }

    fn session(&self, session_id: &str) -> Option<SessionRecord> {
        self.memory.session(session_id)
    }

    fn get_transcript(&self, session_id: &str) -> Result<Vec<TurnRecord>, StoreError> {
        self.memory.get_transcript(session_id)
    }

    fn query_metrics(&self, query: &MetricQuery) -> Result<MetricSeries, MetricError> {
        self.memory.query_metrics(query)
    }
}
