//! In-memory store, also used as the index of the file store.

use std::collections::BTreeMap;
use std::sync::RwLock;

use super::metrics::{query_metrics, MetricError, MetricQuery, MetricSeries};
use super::record::{SessionRecord, TurnRecord};
use super::{ProfileStore, SessionStore, StoreError};
use crate::model::Scope;
use crate::value::Value;

#[derive(Debug, Default)]
pub(crate) struct Index {
    sessions: BTreeMap<String, (SessionRecord, Vec<TurnRecord>)>,
    profiles: BTreeMap<(Scope, String), BTreeMap<String, Value>>,
}

impl Index {
    pub(crate) fn session_exists(&self, id: &str) -> bool {
        self.sessions.contains_key(id)
    }

    pub(crate) fn create_session(&mut self, record: SessionRecord) -> Result<(), StoreError> {
        if self.sessions.contains_key(&record.session_id) {
            return Err(StoreError::DuplicateSession(record.session_id));
        }
        self.sessions.insert(record.session_id.clone(), (record, Vec::new()));
        Ok(())
    }

    pub(crate) fn update_session(&mut self, record: SessionRecord) -> Result<(), StoreError> {
        match self.sessions.get_mut(&record.session_id) {
            Some((stored, _)) => {
                *stored = record;
                Ok(())
            }
            None => Err(StoreError::NotFound(record.session_id)),
        }
    }

    pub(crate) fn check_turn(&self, record: &TurnRecord) -> Result<(), StoreError> {
        let (_, turns) = self
            .sessions
            .get(&record.session_id)
            .ok_or_else(|| StoreError::NotFound(record.session_id.clone()))?;
        let expected = turns.len() as u64;
        if record.turn_index < expected {
            return Err(StoreError::DuplicateTurn {
                session: record.session_id.clone(),
                index: record.turn_index,
            });
        }
        if record.turn_index > expected {
            return Err(StoreError::OutOfOrder {
                session: record.session_id.clone(),
                expected,
                index: record.turn_index,
            });
        }
        Ok(())
    }

    pub(crate) fn append_turn(&mut self, record: TurnRecord) -> Result<(), StoreError> {
        self.check_turn(&record)?;
        let (_, turns) = self.sessions.get_mut(&record.session_id).expect("checked above");
        turns.push(record);
        Ok(())
    }

    pub(crate) fn set_attribute(&mut self, scope: Scope, key: &str, name: &str, value: Value) {
        self.profiles
            .entry((scope, key.to_string()))
            .or_default()
            .insert(name.to_string(), value);
    }

    fn get_attribute(&self, scope: Scope, key: &str, name: &str) -> Option<Value> {
        self.profiles
            .get(&(scope, key.to_string()))
            .and_then(|m| m.get(name))
            .cloned()
    }

    fn list_attributes(&self, scope: Scope, key: &str) -> BTreeMap<String, Value> {
        self.profiles
            .get(&(scope, key.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    fn session(&self, id: &str) -> Option<SessionRecord> {
        self.sessions.get(id).map(|(s, _)| s.clone())
    }

    fn transcript(&self, id: &str) -> Result<Vec<TurnRecord>, StoreError> {
        self.sessions
            .get(id)
            .map(|(_, turns)| turns.clone())
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    fn metrics(&self, q: &MetricQuery) -> Result<MetricSeries, MetricError> {
        query_metrics(self.sessions.values().map(|(s, t)| (s, t.as_slice())), q)
    }
}

/// A store that keeps everything in memory.
#[derive(Debug, Default)]
pub struct MemoryStore {
    pub(crate) index: RwLock<Index>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn read(&self) -> std::sync::RwLockReadGuard<'_, Index> {
        self.index.read().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn write(&self) -> std::sync::RwLockWriteGuard<'_, Index> {
        self.index.write().unwrap_or_else(|e| e.into_inner())
    }
}

impl ProfileStore for MemoryStore {
    fn get_attribute(&self, scope: Scope, key: &str, name: &str) -> Option<Value> {
        self.read().get_attribute(scope, key, name)
    }

    fn set_attribute(&self, scope: Scope, key: &str, name: &str, value: Value) -> Result<(), StoreError> {
        self.write().set_attribute(scope, key, name, value);
        Ok(())
    }

    fn list_attributes(&self, scope: Scope, key: &str) -> BTreeMap<String, Value> {
        self.read().list_attributes(scope, key)
    }
}

impl SessionStore for MemoryStore {
    fn create_session(&self, record: SessionRecord) -> Result<(), StoreError> {
        self.write().create_session(record)
    }

    fn update_session(&self, record: SessionRecord) -> Result<(), StoreError> {
        self.write().update_session(record)
    }

    fn append_turn(&self, record: TurnRecord) -> Result<(), StoreError> {
        self.write().append_turn(record)
    }

    fn session(&self, session_id: &str) -> Option<SessionRecord> {
        self.read().session(session_id)
    }

    fn get_transcript(&self, session_id: &str) -> Result<Vec<TurnRecord>, StoreError> {
        self.read().transcript(session_id)
    }

    fn query_metrics(&self, query: &MetricQuery) -> Result<MetricSeries, MetricError> {
        self.read().metrics(query)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use chrono::{DateTime, Utc};

    use super::*;
    use crate::store::record::Opening;

    pub(crate) fn session(id: &str) -> SessionRecord {
        SessionRecord {
            session_id: id.into(),
            app_id: "app".into(),
            user_id: "u".into(),
            community: "c".into(),
            client_tag: "web".into(),
            seed: 0,
            started_at: DateTime::<Utc>::UNIX_EPOCH,
            ended_at: None,
            opening: Opening::default(),
            error: None,
        }
    }

    pub(crate) fn turn(session: &str, index: u64, utterance: &str) -> TurnRecord {
        TurnRecord {
            session_id: session.into(),
            turn_index: index,
            raw_utterance: utterance.into(),
            entities: vec![],
            masked_utterance: utterance.into(),
            routing: None,
            skimmer_writes: vec![],
            traversed_nodes: vec![],
            responses: vec![],
            attribute_diff: vec![],
            nrg_used: None,
            duration_ms: 0,
            error: None,
            received_at: DateTime::<Utc>::UNIX_EPOCH,
            ended: false,
            asr_hypotheses: vec![],
        }
    }

    #[test]
    fn append_and_transcript() {
        let store = MemoryStore::new();
        store.create_session(session("s")).unwrap();
        assert!(store.get_transcript("s").unwrap().is_empty());
        for (i, u) in ["a", "b", "c"].into_iter().enumerate() {
            store.append_turn(turn("s", i as u64, u)).unwrap();
        }
        let t = store.get_transcript("s").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].turn_index, 0);
        assert!(matches!(store.append_turn(turn("s", 1, "x")), Err(StoreError::DuplicateTurn { index: 1, .. })));
        assert!(matches!(store.append_turn(turn("s", 9, "x")), Err(StoreError::OutOfOrder { .. })));
        assert!(matches!(store.get_transcript("nope"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn profile_tables() {
        let store = MemoryStore::new();
        store.set_attribute(Scope::User, "u1", "name", "Ann".into()).unwrap();
        store.set_attribute(Scope::Community, "ns", "greeting", "hey".into()).unwrap();
        assert_eq!(store.list_attributes(Scope::User, "u1").get("name"), Some(&Value::from("Ann")));
        assert!(store.list_attributes(Scope::User, "nobody").is_empty());
        assert_eq!(store.get_attribute(Scope::Community, "ns", "greeting"), Some(Value::from("hey")));
    }
}
