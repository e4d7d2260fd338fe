//! Live conversation state.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use rand_chacha::ChaCha8Rng;

use super::attributes::LocalAttributes;
use crate::model::{NodeId, NodeKey};
use crate::nrg::HistoryEntry;
use crate::store::{Opening, SessionRecord};

/// One entry of the sub-dialogue stack. `return_to` names the node of the
/// frame below at which traversal continues once this sub-dialogue exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub dialogue: String,
    pub return_to: Option<NodeId>,
}

/// Where the conversation resumes after a generated follow-up has been
/// answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NrgResume {
    /// Wait again at this User Input node.
    AwaitAt(NodeKey),
    /// Continue along the outgoing edge of this Speech node.
    FollowFrom(NodeKey),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cursor {
    AwaitingInput(NodeKey),
    AwaitingNrg(NrgResume),
    Ended,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub app_id: String,
    pub user_id: String,
    pub community: String,
    pub client_tag: String,
    pub seed: u64,
    pub started_at: DateTime<Utc>,
    pub ended_at: Option<DateTime<Utc>>,
    pub error: Option<String>,
    pub opening: Opening,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) stack: Vec<Frame>,
    pub(crate) cursor: Cursor,
    pub(crate) attributes: LocalAttributes,
    pub(crate) discussed_labels: BTreeSet<String>,
    pub(crate) discussed_entities: BTreeSet<String>,
    pub(crate) history: Vec<HistoryEntry>,
    pub(crate) next_turn: u64,
}

impl Session {
    pub fn cursor(&self) -> &Cursor {
        &self.cursor
    }

    pub fn is_ended(&self) -> bool {
        self.cursor == Cursor::Ended
    }

    pub fn stack(&self) -> &[Frame] {
        &self.stack
    }

    pub fn discussed_labels(&self) -> &BTreeSet<String> {
        &self.discussed_labels
    }

    pub fn discussed_entities(&self) -> &BTreeSet<String> {
        &self.discussed_entities
    }

    pub fn attributes(&self) -> &LocalAttributes {
        &self.attributes
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn turns_taken(&self) -> u64 {
        self.next_turn
    }

    /// Sub-dialogues whose global intents and actions are in view, innermost
    /// first, each listed once.
    pub fn global_scope(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.stack
            .iter()
            .rev()
            .filter(|f| seen.insert(f.dialogue.as_str()))
            .map(|f| f.dialogue.clone())
            .collect()
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            session_id: self.id.clone(),
            app_id: self.app_id.clone(),
            user_id: self.user_id.clone(),
            community: self.community.clone(),
            client_tag: self.client_tag.clone(),
            seed: self.seed,
            started_at: self.started_at,
            ended_at: self.ended_at,
            opening: self.opening.clone(),
            error: self.error.clone(),
        }
    }
}
