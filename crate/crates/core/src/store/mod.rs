//! Session, transcript and attribute persistence plus analytics.

mod file;
mod memory;
mod metrics;
mod record;

use std::collections::BTreeMap;

use thiserror::Error;

pub use file::FileStore;
pub use memory::MemoryStore;
pub use metrics::{
    bucket_start, query_metrics, Granularity, GroupBy, Metric, MetricError, MetricPoint, MetricQuery, MetricSeries,
};
pub use record::{AttributeChange, NrgUse, Opening, SessionRecord, SkimmerWrite, TurnRecord};

use crate::model::Scope;
use crate::value::Value;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("session `{0}` already exists")]
    DuplicateSession(String),
    #[error("session `{session}` already has turn {index}")]
    DuplicateTurn { session: String, index: u64 },
    #[error("session `{session}` expects turn {expected}, got {index}")]
    OutOfOrder { session: String, expected: u64, index: u64 },
    #[error("{file}:{line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// User- and community-scoped attribute values that outlive sessions.
/// User values are keyed by user id, community values by namespace.
pub trait ProfileStore: Send + Sync {
    fn get_attribute(&self, scope: Scope, key: &str, name: &str) -> Option<Value>;
    fn set_attribute(&self, scope: Scope, key: &str, name: &str, value: Value) -> Result<(), StoreError>;
    fn list_attributes(&self, scope: Scope, key: &str) -> BTreeMap<String, Value>;
}

pub trait SessionStore: ProfileStore {
    fn create_session(&self, record: SessionRecord) -> Result<(), StoreError>;
    /// Replaces the stored record of an existing session.
    fn update_session(&self, record: SessionRecord) -> Result<(), StoreError>;
    /// Turn indexes must arrive in order starting at 0.
    fn append_turn(&self, record: TurnRecord) -> Result<(), StoreError>;
    fn session(&self, session_id: &str) -> Option<SessionRecord>;
    fn get_transcript(&self, session_id: &str) -> Result<Vec<TurnRecord>, StoreError>;
    fn query_metrics(&self, query: &MetricQuery) -> Result<MetricSeries, MetricError>;
}
