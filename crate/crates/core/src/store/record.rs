//! Persisted session and turn records.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{AttributeRef, DialogueAct, Scope};
use crate::nlu::{EntitySpan, RouteScope, RoutingDecision};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkimmerWrite {
    pub attribute: AttributeRef,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeChange {
    pub scope: Scope,
    pub name: String,
    pub old: Value,
    pub new: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrgUse {
    pub act: DialogueAct,
    /// The configured backend failed and the stub answered instead.
    pub fallback: bool,
}

/// One user turn with its full annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub session_id: String,
    pub turn_index: u64,
    pub raw_utterance: String,
    pub entities: Vec<EntitySpan>,
    pub masked_utterance: String,
    /// Absent for silence and for turns answered by the response generator
    /// without classification.
    pub routing: Option<RoutingDecision>,
    pub skimmer_writes: Vec<SkimmerWrite>,
    /// `dialogue/node` keys in visiting order. Generated responses appear as
    /// `nrg:<act>` markers.
    pub traversed_nodes: Vec<String>,
    pub responses: Vec<String>,
    pub attribute_diff: Vec<AttributeChange>,
    pub nrg_used: Option<NrgUse>,
    pub duration_ms: u64,
    pub error: Option<String>,
    pub received_at: DateTime<Utc>,
    pub ended: bool,
    /// Reserved for voice clients; always empty.
    pub asr_hypotheses: Vec<String>,
}

impl TurnRecord {
    pub fn is_out_of_domain(&self) -> bool {
        self.routing
            .as_ref()
            .is_some_and(|r| r.scope == RouteScope::OutOfDomain)
    }
}

/// What the application said on launch, before the first user turn.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Opening {
    pub responses: Vec<String>,
    pub traversed_nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub app_id: String,
    pub user_id: String,
    pub community: String,
    pub client_tag: String,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub ended_at: Option<DateTime<Utc>>,
    pub opening: Opening,
    pub error: Option<String>,
}
