//! Training of the per-context intent models.
//!
//! Every User Input node gets a classifier over its connected intents and
//! every sub-dialogue with global intents gets one over those. The example
//! bank keeps the masked embedding of every training example for the
//! similarity-based scope routing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::classifier::{IntentClassifier, TrainParams};
use super::embed::{Embedder, Embedding};
use crate::model::{serialize_bundle, DialogueBundle, Node, NodeKey, NodePayload, SubDialogue};

pub const PACK_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub masked: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub classifier: IntentClassifier,
    /// Entity types appearing in the examples of this context's intents.
    pub entity_types: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNluPack {
    pub format: u32,
    pub embedder: String,
    pub bundle_digest: String,
    pub ood_threshold: f64,
    /// Keyed by User Input node.
    pub local: BTreeMap<NodeKey, ContextModel>,
    /// Keyed by sub-dialogue id.
    pub global: BTreeMap<String, ContextModel>,
    /// Keyed by intent node.
    pub bank: BTreeMap<NodeKey, Vec<BankEntry>>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("intent {0} has no usable examples after masking")]
    NoUsableExamples(NodeKey),
    #[error("invalid pack artifact: {0}")]
    Artifact(#[from] serde_json::Error),
    #[error("pack format {found} is not supported (expected {PACK_FORMAT})")]
    Format { found: u32 },
}

/// SHA-256 of the canonical bundle document.
pub fn bundle_digest(bundle: &DialogueBundle) -> String {
    hex::encode(Sha256::digest(serialize_bundle(bundle).as_bytes()))
}

struct ContextData {
    classes: Vec<NodeKey>,
    examples: Vec<(usize, Embedding)>,
    entity_types: BTreeSet<String>,
}

fn collect_context<'a>(
    dialogue: &SubDialogue,
    intents: impl IntoIterator<Item = &'a Node>,
    embedder: &dyn Embedder,
    bank: &mut BTreeMap<NodeKey, Vec<BankEntry>>,
) -> Result<ContextData, TrainError> {
    let mut data = ContextData {
        classes: Vec::new(),
        examples: Vec::new(),
        entity_types: BTreeSet::new(),
    };
    for node in intents {
        let NodePayload::Intent(intent) = &node.payload else {
            continue;
        };
        let key = NodeKey::new(dialogue.id.clone(), node.id.clone());
        let class = data.classes.len();
        let entries = match bank.get(&key) {
            Some(entries) => entries.clone(),
            None => {
                let entries: Vec<BankEntry> = intent
                    .examples
                    .iter()
                    .map(|ex| {
                        let masked = ex.masked();
                        let embedding = embedder.embed(&masked);
                        BankEntry { masked, embedding }
                    })
                    .filter(|e| !e.embedding.is_zero())
                    .collect();
                if entries.is_empty() {
                    return Err(TrainError::NoUsableExamples(key));
                }
                bank.insert(key.clone(), entries.clone());
                entries
            }
        };
        for example in &intent.examples {
            data.entity_types
                .extend(example.entity_types().map(str::to_string));
        }
        data.examples
            .extend(entries.into_iter().map(|e| (class, e.embedding)));
        data.classes.push(key);
    }
    Ok(data)
}

fn fit(data: ContextData, dim: usize, params: TrainParams) -> ContextModel {
    let pairs: Vec<(usize, &Embedding)> = data.examples.iter().map(|(c, e)| (*c, e)).collect();
    ContextModel {
        classifier: IntentClassifier::train(data.classes, &pairs, dim, params),
        entity_types: data.entity_types,
    }
}

/// Trains every local and global intent model of the bundle.
pub fn train_pack(
    bundle: &DialogueBundle,
    embedder: &dyn Embedder,
    params: TrainParams,
) -> Result<TrainedNluPack, TrainError> {
    let dim = embedder.embed("").dim();
    let mut bank = BTreeMap::new();
    let mut local = BTreeMap::new();
    let mut global = BTreeMap::new();
    for dialogue in &bundle.sub_dialogues {
        for user_input in dialogue.user_inputs() {
            let intents = dialogue.local_intents(&user_input.id);
            if intents.is_empty() {
                continue;
            }
            let data = collect_context(dialogue, intents, embedder, &mut bank)?;
            local.insert(
                NodeKey::new(dialogue.id.clone(), user_input.id.clone()),
                fit(data, dim, params),
            );
        }
        let globals: Vec<&Node> = dialogue.global_intents().collect();
        if !globals.is_empty() {
            let data = collect_context(dialogue, globals, embedder, &mut bank)?;
            global.insert(dialogue.id.clone(), fit(data, dim, params));
        }
    }
    Ok(TrainedNluPack {
        format: PACK_FORMAT,
        embedder: embedder.id(),
        bundle_digest: bundle_digest(bundle),
        ood_threshold: bundle.config.ood_threshold,
        local,
        global,
        bank,
    })
}

impl TrainedNluPack {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pack serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedNluPack, TrainError> {
        let pack: TrainedNluPack = serde_json::from_str(text)?;
        if pack.format != PACK_FORMAT {
            return Err(TrainError::Format { found: pack.format });
        }
        Ok(pack)
    }

    /// Entity types to mask at `context` with the globals of `global_scope`
    /// in view.
    pub fn allowed_entity_types(&self, context: &NodeKey, global_scope: &[String]) -> BTreeSet<String> {
        let mut types = BTreeSet::new();
        if let Some(model) = self.local.get(context) {
            types.extend(model.entity_types.iter().cloned());
        }
        for dialogue in global_scope {
            if let Some(model) = self.global.get(dialogue) {
                types.extend(model.entity_types.iter().cloned());
            }
        }
        types
    }
}
